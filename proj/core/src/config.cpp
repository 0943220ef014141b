#include "dto/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "dto/errors.hpp"
#include "dto/hash.hpp"
#include "dto/mock_backend.hpp"

namespace dto {

namespace {

using nlohmann::json;

// Reads an object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + ": expected an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError(name_ + ": unknown key '" + key + "'");
    }
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (const json* v = get(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        throw ConfigError(name_ + "." + key + ": wrong type");
      }
    }
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_params(Section& s, SamplingParams& p) {
  s.read("temperature", p.temperature);
  s.read("top_p", p.top_p);
  s.read("max_tokens", p.max_tokens);
}

void read_strategy(Section& s, SampleStrategy& out) {
  std::string text;
  s.read("strategy", text);
  if (!text.empty()) out = parse_sample_strategy(text);
}

AnswerMatchPolicy read_match(const json& j, const std::string& name, AnswerMatchPolicy policy) {
  Section s(j, name);
  std::string mode;
  s.read("mode", mode);
  if (!mode.empty()) policy.mode = parse_match_mode(mode);
  if (const json* rules = s.get("normalization")) {
    if (!rules->is_array()) throw ConfigError(s.path("normalization") + ": expected a list");
    policy.normalization.clear();
    for (const auto& r : *rules) policy.normalization.push_back(parse_normalization_rule(r.get<std::string>()));
  }
  s.read("numeric_fallback", policy.numeric_fallback);
  return policy;
}

json match_json(const AnswerMatchPolicy& p) {
  json rules = json::array();
  for (auto r : p.normalization) rules.push_back(std::string(to_string(r)));
  return {{"mode", std::string(to_string(p.mode))}, {"normalization", rules}, {"numeric_fallback", p.numeric_fallback}};
}

void read_backend(const json& j, const std::string& name, BackendSpec& spec) {
  Section s(j, name);
  s.read("base_url", spec.http.base_url);
  s.read("model", spec.http.model);
  s.read("completions_path", spec.http.completions_path);
  s.read("tokenize_path", spec.http.tokenize_path);
  s.read("max_retries", spec.http.max_retries);
  s.read("max_in_flight", spec.http.max_in_flight);
  s.read("env_prefix", spec.env_prefix);
  int timeout = static_cast<int>(spec.http.timeout.count());
  s.read("timeout_s", timeout);
  spec.http.timeout = std::chrono::seconds(timeout);
  std::string key_env;
  s.read("api_key_env", key_env);
  if (!key_env.empty()) {
    if (const char* v = std::getenv(key_env.c_str())) spec.http.api_key = v;
  }
  std::string mock;
  s.read("mock", mock);
  if (!mock.empty()) spec.mock_fixture = mock;
}

json backend_json(const BackendSpec& spec, bool with_location) {
  json j = {{"model", spec.http.model},
            {"max_retries", spec.http.max_retries},
            {"max_in_flight", spec.http.max_in_flight},
            {"timeout_s", spec.http.timeout.count()}};
  if (with_location) {
    j["base_url"] = spec.http.base_url;
    j["completions_path"] = spec.http.completions_path;
    j["tokenize_path"] = spec.http.tokenize_path;
    j["env_prefix"] = spec.env_prefix;
    if (spec.mock_fixture) j["mock"] = spec.mock_fixture->string();
  }
  return j;
}

json to_json_impl(const RunConfig& c, bool with_locations) {
  json j;
  j["policy"] = backend_json(c.policy, with_locations);
  j["judge"] = backend_json(c.judge, with_locations);
  j["prompt_template"] = c.prompt_template;
  j["assistant_prefix"] = c.assistant_prefix;
  j["framing"] = {{"open", c.framing.open}, {"close", c.framing.close}};
  j["lexicon"] = {{"cues", c.cues}, {"granularity", std::string(to_string(c.granularity))}};
  j["sampling"] = {{"temperature", c.sampling.temperature},
                   {"top_p", c.sampling.top_p},
                   {"max_tokens", c.sampling.max_tokens},
                   {"strategy", std::string(to_string(c.sample_strategy))}};
  j["exit"] = {{"pattern", c.exit.exit_pattern},
               {"samples", c.exit.samples},
               {"threshold", c.exit.threshold},
               {"answer_margin_tokens", c.exit.answer_margin_tokens},
               {"window", c.exit.window},
               {"temperature", c.exit.sampling.temperature},
               {"top_p", c.exit.sampling.top_p},
               {"strategy", std::string(to_string(c.exit.strategy))},
               {"match", match_json(c.exit.match_policy)}};
  j["finalize"] = {{"pattern", c.finalize.finalize_pattern},
                   {"separator", c.finalize.separator},
                   {"samples", c.finalize.samples},
                   {"temperature", c.finalize.completion_params.temperature},
                   {"top_p", c.finalize.completion_params.top_p},
                   {"max_tokens", c.finalize.completion_params.max_tokens},
                   {"strategy", std::string(to_string(c.finalize.strategy))},
                   {"match", match_json(c.finalize.match_policy)}};
  j["prune"] = {{"margin_tokens", c.prune.margin_tokens},
                {"validate_each", c.prune.validate_each},
                {"protect_first_segment", c.prune.protect_first_segment},
                {"parallel_validations", c.prune.parallel_validations},
                {"judge_temperature", c.prune.judge_params.temperature},
                {"judge_max_tokens", c.prune.judge_params.max_tokens},
                {"judge_template", c.prune.judge_template}};
  j["simpo"] = {{"beta", c.simpo.beta}, {"gamma", c.simpo.gamma}};
  json eval = {{"match", match_json(c.evaluation.match_policy)}, {"cue", c.evaluation.cue}};
  eval["alpha"] = c.evaluation.alpha ? json(*c.evaluation.alpha) : json(nullptr);
  j["evaluation"] = eval;
  j["N"] = c.N;
  j["samples_per_problem"] = c.samples_per_problem;
  j["run_seed"] = c.run_seed;
  j["workers"] = c.workers;
  j["dataset_fields"] = {{"id", c.fields.id}, {"problem", c.fields.problem}, {"answer", c.fields.answer}};
  j["max_failure_rate"] = c.max_failure_rate;
  return j;
}

}  // namespace

CueLexicon RunConfig::lexicon() const { return CueLexicon(cues, granularity); }

void RunConfig::validate() const {
  try {
    sampling.validate();
    exit.validate();
    finalize.validate();
    prune.validate();
    simpo.validate();
    (void)lexicon();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (N == 0) throw ConfigError("N must be positive");
  if (samples_per_problem < N) throw ConfigError("samples_per_problem must be at least N");
  if (workers < 1) throw ConfigError("workers must be positive");
  if (!(max_failure_rate >= 0.0 && max_failure_rate <= 1.0)) throw ConfigError("max_failure_rate must lie in [0, 1]");
  if (framing.close.empty()) throw ConfigError("framing.close must not be empty");
  if (evaluation.alpha && !(*evaluation.alpha >= 0.0 && *evaluation.alpha <= 1.0)) {
    throw ConfigError("evaluation.alpha must lie in [0, 1]");
  }
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Section s(j, "config");
  if (const json* v = s.get("policy")) read_backend(*v, "policy", c.policy);
  if (const json* v = s.get("judge")) read_backend(*v, "judge", c.judge);

  std::string tmpl;
  s.read("prompt_template", tmpl);
  if (tmpl == "default") {
    c.prompt_template = std::string(kDefaultPromptTemplate);
  } else if (tmpl == "fast") {
    c.prompt_template = std::string(kFastPromptTemplate);
  } else if (!tmpl.empty()) {
    c.prompt_template = tmpl;
  }
  s.read("assistant_prefix", c.assistant_prefix);

  if (const json* v = s.get("framing")) {
    Section f(*v, "framing");
    f.read("open", c.framing.open);
    f.read("close", c.framing.close);
  }
  if (const json* v = s.get("lexicon")) {
    Section l(*v, "lexicon");
    l.read("cues", c.cues);
    std::string g;
    l.read("granularity", g);
    if (!g.empty()) c.granularity = parse_granularity(g);
  }
  if (const json* v = s.get("sampling")) {
    Section p(*v, "sampling");
    read_params(p, c.sampling);
    read_strategy(p, c.sample_strategy);
  }
  if (const json* v = s.get("exit")) {
    Section e(*v, "exit");
    e.read("pattern", c.exit.exit_pattern);
    e.read("samples", c.exit.samples);
    e.read("threshold", c.exit.threshold);
    e.read("answer_margin_tokens", c.exit.answer_margin_tokens);
    e.read("window", c.exit.window);
    e.read("temperature", c.exit.sampling.temperature);
    e.read("top_p", c.exit.sampling.top_p);
    read_strategy(e, c.exit.strategy);
    if (const json* m = e.get("match")) c.exit.match_policy = read_match(*m, "exit.match", c.exit.match_policy);
  }
  if (const json* v = s.get("finalize")) {
    Section f(*v, "finalize");
    f.read("pattern", c.finalize.finalize_pattern);
    f.read("separator", c.finalize.separator);
    f.read("samples", c.finalize.samples);
    read_params(f, c.finalize.completion_params);
    read_strategy(f, c.finalize.strategy);
    if (const json* m = f.get("match")) {
      c.finalize.match_policy = read_match(*m, "finalize.match", c.finalize.match_policy);
    }
  }
  if (const json* v = s.get("prune")) {
    Section p(*v, "prune");
    p.read("margin_tokens", c.prune.margin_tokens);
    p.read("validate_each", c.prune.validate_each);
    p.read("protect_first_segment", c.prune.protect_first_segment);
    p.read("parallel_validations", c.prune.parallel_validations);
    p.read("judge_temperature", c.prune.judge_params.temperature);
    p.read("judge_max_tokens", c.prune.judge_params.max_tokens);
    p.read("judge_template", c.prune.judge_template);
  }
  if (const json* v = s.get("simpo")) {
    Section p(*v, "simpo");
    p.read("beta", c.simpo.beta);
    const json* g = p.get("gamma");
    const json* ratio = p.get("gamma_over_beta");
    if (g && ratio) throw ConfigError("simpo: give gamma or gamma_over_beta, not both");
    if (g) c.simpo.gamma = g->get<double>();
    if (ratio) c.simpo.gamma = ratio->get<double>() * c.simpo.beta;
  }
  if (const json* v = s.get("evaluation")) {
    Section e(*v, "evaluation");
    if (const json* m = e.get("match")) {
      c.evaluation.match_policy = read_match(*m, "evaluation.match", c.evaluation.match_policy);
    }
    if (const json* a = e.get("alpha"); a && !a->is_null()) c.evaluation.alpha = a->get<double>();
    e.read("cue", c.evaluation.cue);
  }
  s.read("N", c.N);
  s.read("samples_per_problem", c.samples_per_problem);
  s.read("run_seed", c.run_seed);
  s.read("workers", c.workers);
  if (const json* v = s.get("dataset_fields")) {
    Section f(*v, "dataset_fields");
    f.read("id", c.fields.id);
    f.read("problem", c.fields.problem);
    f.read("answer", c.fields.answer);
  }
  s.read("max_failure_rate", c.max_failure_rate);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  RunConfig c = run_config_from_json(j);
  // Fixture paths are relative to the config file.
  for (BackendSpec* spec : {&c.policy, &c.judge}) {
    if (spec->mock_fixture && spec->mock_fixture->is_relative()) {
      spec->mock_fixture = path.parent_path() / *spec->mock_fixture;
    }
  }
  return c;
}

json to_json(const RunConfig& cfg) { return to_json_impl(cfg, true); }

std::uint64_t config_hash(const RunConfig& cfg) {
  json j = to_json_impl(cfg, false);
  // Concurrency settings change scheduling, never results.
  j.erase("workers");
  j["exit"].erase("window");
  j["prune"].erase("parallel_validations");
  return fnv1a64(j.dump());
}

void apply_env_overrides(RunConfig& cfg) {
  for (BackendSpec* spec : {&cfg.policy, &cfg.judge}) {
    if (!spec->env_prefix.empty()) spec->http = HttpBackendConfig::from_env(spec->env_prefix, spec->http);
  }
}

std::string render_task_prompt(std::string_view tmpl, std::string_view statement) {
  std::string out;
  std::size_t pos = 0;
  bool found = false;
  while (pos < tmpl.size()) {
    std::size_t a = tmpl.find("{{ problem }}", pos);
    std::size_t b = tmpl.find("{{problem}}", pos);
    std::size_t at = std::min(a, b);
    if (at == std::string_view::npos) break;
    std::size_t len = at == a ? std::string_view("{{ problem }}").size() : std::string_view("{{problem}}").size();
    out.append(tmpl.substr(pos, at - pos));
    out.append(statement);
    pos = at + len;
    found = true;
  }
  if (!found) throw ConfigError("prompt template has no {{ problem }} placeholder");
  out.append(tmpl.substr(pos));
  return out;
}

std::unique_ptr<Backend> make_backend(const BackendSpec& spec) {
  if (spec.mock_fixture) return std::make_unique<MockBackend>(ScriptedFixture::load(*spec.mock_fixture));
  return std::make_unique<HttpBackend>(spec.http);
}

std::string backend_identity(const BackendSpec& spec) {
  if (spec.mock_fixture) return "mock:" + to_hex(hash_file(*spec.mock_fixture));
  return "http:" + spec.http.model;
}

}  // namespace dto
