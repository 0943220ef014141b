#include "dto/mock_backend.hpp"

#include <cctype>
#include <fstream>
#include <istream>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "dto/errors.hpp"
#include "dto/hash.hpp"

namespace dto {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

struct GlobToken {
  bool star = false;
  char literal = 0;
};

std::vector<GlobToken> compile_glob(std::string_view pattern) {
  std::vector<GlobToken> out;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == '\\' && i + 1 < pattern.size() && pattern[i + 1] == '*') {
      out.push_back({false, '*'});
      ++i;
    } else if (pattern[i] == '*') {
      out.push_back({true, 0});
    } else {
      out.push_back({false, pattern[i]});
    }
  }
  return out;
}

// Iterative wildcard match with single-star backtracking.
bool glob_match(std::string_view pattern, std::string_view text) {
  const auto tokens = compile_glob(pattern);
  std::size_t t = 0;
  std::size_t s = 0;
  std::size_t star_t = std::string_view::npos;
  std::size_t star_s = 0;
  while (s < text.size()) {
    if (t < tokens.size() && !tokens[t].star && tokens[t].literal == text[s]) {
      ++t;
      ++s;
    } else if (t < tokens.size() && tokens[t].star) {
      star_t = t++;
      star_s = s;
    } else if (star_t != std::string_view::npos) {
      t = star_t + 1;
      s = ++star_s;
    } else {
      return false;
    }
  }
  while (t < tokens.size() && tokens[t].star) ++t;
  return t == tokens.size();
}

MatchKind parse_kind(std::string_view text) {
  if (text == "contains") return MatchKind::contains;
  if (text == "suffix") return MatchKind::suffix;
  if (text == "prefix") return MatchKind::prefix;
  if (text == "exact") return MatchKind::exact;
  if (text == "glob") return MatchKind::glob;
  throw ConfigError("unknown fixture match kind: " + std::string(text));
}

// Cut at the earliest stop string, then at max_tokens words.
Completion shape_completion(std::string text, const GenerationRequest& request) {
  Completion c;
  c.finish_reason = FinishReason::stop;
  std::size_t cut = std::string::npos;
  for (const auto& stop : request.stop) {
    if (stop.empty()) continue;
    cut = std::min(cut, text.find(stop));
  }
  if (cut != std::string::npos) text.resize(cut);

  const auto limit = static_cast<std::size_t>(request.params.max_tokens);
  auto words = split_words(text);
  if (words.size() > limit) {
    std::size_t end = limit == 0 ? 0 : static_cast<std::size_t>(words[limit - 1].data() - text.data()) +
                                           words[limit - 1].size();
    text.resize(end);
    c.finish_reason = FinishReason::length;
    words.resize(limit);
  }
  c.tokens = words.size();
  if (request.logprobs) {
    std::vector<TokenLogprob> lps;
    lps.reserve(words.size());
    for (auto w : words) lps.push_back({std::string(w), MockBackend::word_logprob(w)});
    c.token_logprobs = std::move(lps);
  }
  c.text = std::move(text);
  return c;
}

}  // namespace

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t b = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > b) words.push_back(text.substr(b, i - b));
  }
  return words;
}

std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

bool FixtureRule::matches(std::string_view prompt) const {
  switch (kind) {
    case MatchKind::contains: return prompt.find(match) != std::string_view::npos;
    case MatchKind::suffix: return prompt.ends_with(match);
    case MatchKind::prefix: return prompt.starts_with(match);
    case MatchKind::exact: return prompt == match;
    case MatchKind::glob: return glob_match(match, prompt);
  }
  return false;
}

ScriptedFixture::ScriptedFixture(std::vector<FixtureRule> rules) {
  for (auto& r : rules) add(std::move(r));
}

void ScriptedFixture::add(FixtureRule rule) {
  if (rule.responses.empty()) throw ConfigError("fixture rule '" + rule.match + "' has no responses");
  rules_.push_back(std::move(rule));
}

std::size_t ScriptedFixture::find(std::string_view prompt) const {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (rules_[i].matches(prompt)) return i;
  }
  return static_cast<std::size_t>(-1);
}

ScriptedFixture ScriptedFixture::parse(std::istream& in) {
  ScriptedFixture fixture;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      auto j = nlohmann::json::parse(line);
      FixtureRule rule;
      rule.match = j.at("match").get<std::string>();
      rule.kind = parse_kind(j.value("kind", std::string("contains")));
      rule.responses = j.at("responses").get<std::vector<std::string>>();
      if (auto mode = j.value("mode", std::string("cycle")); mode != "cycle") {
        throw ConfigError("unsupported fixture mode: " + mode);
      }
      fixture.add(std::move(rule));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("fixture line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return fixture;
}

ScriptedFixture ScriptedFixture::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open fixture " + path.string());
  return parse(in);
}

MockBackend::MockBackend(ScriptedFixture fixture, MockOptions options)
    : fixture_(std::move(fixture)), options_(options) {}

double MockBackend::word_logprob(std::string_view word) {
  return -0.05 - 0.01 * static_cast<double>(fnv1a64(word) % 50);
}

GenerationResult MockBackend::generate(const GenerationRequest& request) {
  request.params.validate();
  if (request.prompt.empty()) throw InvalidArgument("generation prompt is empty");
  const std::size_t rule_index = fixture_.find(request.prompt);
  if (rule_index == static_cast<std::size_t>(-1)) {
    const std::size_t tail = std::min<std::size_t>(request.prompt.size(), 80);
    throw FixtureMiss("no fixture rule matches prompt ending in: ..." +
                      request.prompt.substr(request.prompt.size() - tail));
  }
  const auto& rule = fixture_.rules()[rule_index];
  const auto n = static_cast<std::size_t>(request.params.n);

  std::size_t start = 0;
  {
    std::lock_guard lock(mu_);
    auto& cursor = cursors_[{rule_index, fnv1a64(request.prompt)}];
    start = cursor;
    cursor += n;
    ++calls_;
  }

  if (options_.max_latency.count() > 0) {
    std::mt19937_64 rng(mix_seed({options_.latency_seed, fnv1a64(request.prompt), start}));
    auto span = static_cast<std::uint64_t>(options_.max_latency.count()) + 1;
    std::this_thread::sleep_for(std::chrono::microseconds(rng() % span));
  }

  GenerationResult result;
  result.correlation_id = request.correlation_id;
  result.usage.prompt_tokens = count_words(request.prompt);
  for (std::size_t j = 0; j < n; ++j) {
    Completion c = shape_completion(rule.responses[(start + j) % rule.responses.size()], request);
    result.usage.completion_tokens.push_back(c.tokens);
    result.completions.push_back(std::move(c));
  }
  return result;
}

std::size_t MockBackend::count_tokens(std::string_view text) { return count_words(text); }

std::vector<TokenLogprob> MockBackend::score(std::string_view, std::string_view continuation) {
  std::vector<TokenLogprob> out;
  for (auto w : split_words(continuation)) out.push_back({std::string(w), word_logprob(w)});
  return out;
}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

}  // namespace dto
