#include "dto/http_backend.hpp"

#include <algorithm>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dto/errors.hpp"

namespace dto {
namespace {

using nlohmann::json;

std::optional<std::string> getenv_str(const std::string& name) {
  if (const char* v = std::getenv(name.c_str()); v != nullptr && *v != '\0') return std::string(v);
  return std::nullopt;
}

std::optional<double> parse_retry_after(const httplib::Result& res) {
  if (!res || !res->has_header("Retry-After")) return std::nullopt;
  try {
    return std::stod(res->get_header_value("Retry-After"));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

FinishReason parse_finish(const json& choice) {
  auto it = choice.find("finish_reason");
  if (it != choice.end() && it->is_string() && it->get<std::string>() == "length") {
    return FinishReason::length;
  }
  return FinishReason::stop;
}

// choices[].logprobs in the completion schema: parallel tokens / token_logprobs / text_offset.
struct LogprobTable {
  std::vector<std::string> tokens;
  std::vector<std::optional<double>> logprobs;
  std::vector<std::size_t> offsets;
};

std::optional<LogprobTable> parse_logprobs(const json& choice) {
  auto it = choice.find("logprobs");
  if (it == choice.end() || !it->is_object()) return std::nullopt;
  LogprobTable t;
  if (!it->contains("tokens") || !it->contains("token_logprobs")) return std::nullopt;
  t.tokens = it->at("tokens").get<std::vector<std::string>>();
  for (const auto& v : it->at("token_logprobs")) {
    t.logprobs.push_back(v.is_number() ? std::optional<double>(v.get<double>()) : std::nullopt);
  }
  if (it->contains("text_offset")) t.offsets = it->at("text_offset").get<std::vector<std::size_t>>();
  if (t.logprobs.size() != t.tokens.size()) return std::nullopt;
  return t;
}

}  // namespace

struct HttpBackend::Endpoint {
  std::string host;         // scheme://host[:port]
  std::string path_prefix;  // e.g. /v1
};

HttpBackendConfig HttpBackendConfig::from_env(std::string_view prefix, HttpBackendConfig defaults) {
  const std::string p(prefix);
  if (auto v = getenv_str(p + "_BASE_URL")) defaults.base_url = *v;
  if (auto v = getenv_str(p + "_API_KEY")) defaults.api_key = *v;
  if (auto v = getenv_str(p + "_MODEL")) defaults.model = *v;
  return defaults;
}

HttpBackendConfig HttpBackendConfig::from_env(std::string_view prefix) { return from_env(prefix, {}); }

HttpBackend::HttpBackend(HttpBackendConfig config)
    : config_(std::move(config)),
      endpoint_(std::make_unique<Endpoint>()),
      in_flight_(std::max(1, config_.max_in_flight)) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.base_url, m, url_re)) {
    throw ConfigError("invalid backend base_url: " + config_.base_url);
  }
  endpoint_->host = m[1].str();
  endpoint_->path_prefix = m[2].matched ? m[2].str() : "";
  while (!endpoint_->path_prefix.empty() && endpoint_->path_prefix.back() == '/') {
    endpoint_->path_prefix.pop_back();
  }
  if (config_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::post(const std::string& path, const std::string& body) {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  httplib::Client client(endpoint_->host);
  const auto secs = static_cast<time_t>(config_.timeout.count());
  client.set_connection_timeout(std::min<time_t>(secs, 30), 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto backoff = config_.initial_backoff;
  std::string last_error;
  std::optional<double> retry_after;
  bool rate_limited = false;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      auto wait = backoff;
      if (rate_limited && retry_after) {
        wait = std::chrono::milliseconds(static_cast<long long>(*retry_after * 1000.0));
      }
      std::this_thread::sleep_for(std::min(wait, config_.max_backoff));
      backoff = std::min(backoff * 2, config_.max_backoff);
    }
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      rate_limited = false;
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429) {
      rate_limited = true;
      retry_after = parse_retry_after(res);
      last_error = "rate limited";
      continue;
    }
    if (res->status >= 500) {
      rate_limited = false;
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
      continue;
    }
    if (res->status != 200) {
      throw BackendError("HTTP " + std::to_string(res->status) + " from " + path + ": " + res->body);
    }
    return res->body;
  }
  if (rate_limited) throw RateLimited("rate limited by " + endpoint_->host + path, retry_after);
  throw BackendUnavailable(endpoint_->host + path + " unavailable after " +
                           std::to_string(config_.max_retries) + " retries: " + last_error);
}

GenerationResult HttpBackend::generate(const GenerationRequest& request) {
  request.params.validate();
  json body = {
      {"prompt", request.prompt},
      {"n", request.params.n},
      {"temperature", request.params.temperature},
      {"top_p", request.params.top_p},
      {"max_tokens", request.params.max_tokens},
  };
  if (!config_.model.empty()) body["model"] = config_.model;
  if (!request.stop.empty()) body["stop"] = request.stop;
  if (request.params.seed) body["seed"] = *request.params.seed;
  if (request.logprobs) body["logprobs"] = 1;

  json reply;
  try {
    reply = json::parse(post(endpoint_->path_prefix + config_.completions_path, body.dump()));
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("malformed completion response: ") + e.what());
  }
  if (!reply.contains("choices") || !reply["choices"].is_array()) {
    throw BackendError("completion response has no choices array");
  }

  std::vector<std::pair<std::size_t, const json*>> choices;
  std::size_t ordinal = 0;
  for (const auto& c : reply["choices"]) choices.emplace_back(c.value("index", ordinal++), &c);
  std::stable_sort(choices.begin(), choices.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  if (choices.size() != static_cast<std::size_t>(request.params.n)) {
    throw BackendError("expected " + std::to_string(request.params.n) + " choices, got " +
                       std::to_string(choices.size()));
  }

  GenerationResult result;
  result.correlation_id = request.correlation_id;
  const json usage = reply.value("usage", json::object());
  result.usage.prompt_tokens = usage.value("prompt_tokens", std::size_t{0});
  const std::size_t total_completion = usage.value("completion_tokens", std::size_t{0});

  for (const auto& [index, choice] : choices) {
    Completion c;
    c.text = choice->value("text", std::string());
    c.finish_reason = parse_finish(*choice);
    if (auto table = parse_logprobs(*choice)) {
      c.tokens = table->tokens.size();
      if (request.logprobs) {
        std::vector<TokenLogprob> lps;
        for (std::size_t k = 0; k < table->tokens.size(); ++k) {
          lps.push_back({table->tokens[k], table->logprobs[k].value_or(0.0)});
        }
        c.token_logprobs = std::move(lps);
      }
    } else if (choices.size() == 1) {
      c.tokens = total_completion;
    } else {
      c.tokens = count_tokens(c.text);
    }
    result.usage.completion_tokens.push_back(c.tokens);
    result.completions.push_back(std::move(c));
  }
  return result;
}

std::size_t HttpBackend::count_tokens(std::string_view text) {
  if (text.empty()) return 0;
  json body = {{"prompt", std::string(text)}, {"add_special_tokens", false}};
  if (!config_.model.empty()) body["model"] = config_.model;
  json reply;
  try {
    reply = json::parse(post(config_.tokenize_path, body.dump()));
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("malformed tokenize response: ") + e.what());
  }
  if (reply.contains("count")) return reply["count"].get<std::size_t>();
  if (reply.contains("tokens") && reply["tokens"].is_array()) return reply["tokens"].size();
  throw BackendError("tokenize response has neither count nor tokens");
}

std::vector<TokenLogprob> HttpBackend::score(std::string_view prompt, std::string_view continuation) {
  const std::string full = std::string(prompt) + std::string(continuation);
  json body = {{"prompt", full}, {"max_tokens", 1}, {"echo", true}, {"logprobs", 1},
               {"temperature", 0.0}};
  if (!config_.model.empty()) body["model"] = config_.model;
  json reply;
  try {
    reply = json::parse(post(endpoint_->path_prefix + config_.completions_path, body.dump()));
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("malformed score response: ") + e.what());
  }
  if (!reply.contains("choices") || reply["choices"].empty()) {
    throw MissingLogprobs("score response has no choices");
  }
  auto table = parse_logprobs(reply["choices"][0]);
  if (!table || table->offsets.size() != table->tokens.size()) {
    throw MissingLogprobs("backend did not echo prompt logprobs with text offsets");
  }
  std::vector<TokenLogprob> out;
  for (std::size_t k = 0; k < table->tokens.size(); ++k) {
    const std::size_t off = table->offsets[k];
    if (off < prompt.size() || off >= full.size()) continue;
    if (!table->logprobs[k]) throw MissingLogprobs("null logprob inside the scored span");
    out.push_back({table->tokens[k], *table->logprobs[k]});
  }
  if (out.empty() && !continuation.empty()) throw MissingLogprobs("no tokens in the scored span");
  return out;
}

}  // namespace dto
