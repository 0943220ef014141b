// dto: command line front end for the trajectory optimization pipeline.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dto/config.hpp"
#include "dto/errors.hpp"
#include "dto/io.hpp"
#include "dto/metrics.hpp"
#include "dto/pair_builder.hpp"
#include "dto/pipeline.hpp"
#include "dto/segmenter.hpp"
#include "dto/simpo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitFailureBound = 3;

struct Common {
  std::string config;
  std::string mock;
  std::optional<std::uint64_t> seed;
};

dto::RunConfig load_config(const Common& c) {
  dto::RunConfig cfg = c.config.empty() ? dto::RunConfig{} : dto::load_run_config(c.config);
  dto::apply_env_overrides(cfg);
  if (!c.mock.empty()) {
    cfg.policy.mock_fixture = c.mock;
    cfg.judge.mock_fixture = c.mock;
  }
  if (c.seed) cfg.run_seed = *c.seed;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  app->add_option("--mock", c.mock, "Serve policy and judge calls from this fixture")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "Override run_seed");
}

struct Roles {
  std::unique_ptr<dto::Backend> policy;
  std::unique_ptr<dto::Backend> judge;

  explicit Roles(const dto::RunConfig& cfg)
      : policy(dto::make_backend(cfg.policy)), judge(dto::make_backend(cfg.judge)) {}
  dto::Backends view() { return {*policy, *judge}; }
};

std::map<std::string, std::vector<dto::SampledResponse>> samples_by_problem(const fs::path& path) {
  std::map<std::string, std::vector<dto::SampledResponse>> out;
  for (const auto& row : dto::read_jsonl(path).rows) {
    auto s = dto::sampled_response_from_json(row);
    out[s.problem_id].push_back(std::move(s));
  }
  for (auto& [_, v] : out) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.sample_index < b.sample_index; });
  }
  return out;
}

std::string read_text(const std::string& path) {
  if (path == "-") {
    std::string all((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
    return all;
  }
  return dto::read_file(path);
}

int cmd_segment(const Common& common, const std::string& input) {
  dto::RunConfig cfg = load_config(common);
  dto::Trajectory t = dto::segment_response(read_text(input), cfg.lexicon(), cfg.framing);
  json out = json::array();
  for (const auto& s : t.segments()) {
    out.push_back({{"index", s.index}, {"cue", s.cue ? json(*s.cue) : json(nullptr)}, {"text", s.text}});
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_sample(const Common& common, const std::string& dataset, const std::string& out) {
  dto::RunConfig cfg = load_config(common);
  auto set = dto::load_problems(dataset, cfg.fields);
  auto policy = dto::make_backend(cfg.policy);
  std::vector<std::vector<json>> rows(set.problems.size());
  dto::parallel_for(set.problems.size(), cfg.workers, [&](std::size_t i) {
    for (const auto& s : dto::sample_responses(set.problems[i], cfg, *policy)) rows[i].push_back(dto::to_json(s));
  });
  std::vector<json> flat;
  for (auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  dto::write_file_atomic(out, dto::to_jsonl(flat));
  std::cerr << "sampled " << set.problems.size() << " problems (" << set.skipped << " rows skipped)\n";
  return 0;
}

int cmd_optimize(const Common& common, const std::string& dataset, const std::string& samples_path,
                 const std::string& out_dir) {
  dto::RunConfig cfg = load_config(common);
  auto set = dto::load_problems(dataset, cfg.fields);
  auto samples = samples_by_problem(samples_path);
  Roles roles(cfg);
  std::vector<dto::ProblemResult> results(set.problems.size());
  dto::parallel_for(set.problems.size(), cfg.workers, [&](std::size_t i) {
    const auto& p = set.problems[i];
    auto it = samples.find(p.id);
    if (it == samples.end()) {
      results[i].problem = p;
      results[i].error = "no samples";
      return;
    }
    try {
      results[i] = dto::optimize_problem(p, it->second, cfg, roles.view());
    } catch (const dto::Error& e) {
      results[i].problem = p;
      results[i].error = e.what();
    }
  });
  std::vector<json> optimized, probes, prunes, failures;
  for (const auto& r : results) {
    if (r.error) failures.push_back({{"problem_id", r.problem.id}, {"sample", nullptr}, {"reason", *r.error}});
    for (const auto& o : r.outcomes) {
      if (o.trajectory) {
        optimized.push_back(dto::to_json(*o.trajectory));
      } else {
        failures.push_back({{"problem_id", r.problem.id}, {"sample", o.sample_index}, {"reason", o.failure}});
      }
    }
    probes.insert(probes.end(), r.probe_audit.begin(), r.probe_audit.end());
    prunes.insert(prunes.end(), r.prune_audit.begin(), r.prune_audit.end());
  }
  fs::create_directories(out_dir);
  dto::write_file_atomic(fs::path(out_dir) / "optimized.jsonl", dto::to_jsonl(optimized));
  dto::write_file_atomic(fs::path(out_dir) / "probe_audit.jsonl", dto::to_jsonl(probes));
  dto::write_file_atomic(fs::path(out_dir) / "prune_audit.jsonl", dto::to_jsonl(prunes));
  dto::write_file_atomic(fs::path(out_dir) / "failures.jsonl", dto::to_jsonl(failures));
  std::cerr << optimized.size() << " optimized, " << failures.size() << " failures\n";
  return 0;
}

int cmd_build_pairs(const Common& common, const std::string& dataset, const std::string& samples_path,
                    const std::string& optimized_path, const std::string& out) {
  dto::RunConfig cfg = load_config(common);
  auto set = dto::load_problems(dataset, cfg.fields);
  auto samples = samples_by_problem(samples_path);
  std::map<std::pair<std::string, std::size_t>, dto::OptimizedTrajectory> optimized;
  for (const auto& row : dto::read_jsonl(optimized_path).rows) {
    auto t = dto::optimized_trajectory_from_json(row);
    optimized.emplace(std::make_pair(t.problem_id, t.sample_index), std::move(t));
  }
  std::vector<json> rows;
  std::map<std::string, std::size_t> drops;
  for (const auto& p : set.problems) {
    auto it = samples.find(p.id);
    if (it == samples.end()) continue;
    std::vector<dto::OptimizationOutcome> outcomes;
    for (const auto& target : dto::select_optimization_targets(it->second, cfg.N, dto::target_seed(cfg, p))) {
      dto::OptimizationOutcome o;
      o.sample_index = target.sample_index;
      if (auto f = optimized.find({p.id, target.sample_index}); f != optimized.end()) {
        o.trajectory = f->second;
      } else {
        o.failure = "no optimized trajectory";
      }
      outcomes.push_back(std::move(o));
    }
    auto built = dto::build_pairs(p, dto::conditioning_prefix(cfg, p), it->second, outcomes, cfg.N,
                                  cfg.evaluation.match_policy);
    for (const auto& pair : built.pairs) rows.push_back(dto::to_json(pair));
    for (const auto& d : built.drops) ++drops[std::string(dto::to_string(d.reason))];
  }
  dto::write_file_atomic(out, dto::to_jsonl(rows));
  std::cerr << rows.size() << " pairs";
  for (const auto& [reason, n] : drops) std::cerr << ", " << n << " dropped (" << reason << ")";
  std::cerr << "\n";
  return 0;
}

int cmd_score_simpo(const Common& common, const std::string& pairs_path, const std::string& out) {
  dto::RunConfig cfg = load_config(common);
  std::vector<dto::PreferencePair> pairs;
  for (const auto& row : dto::read_jsonl(pairs_path).rows) pairs.push_back(dto::preference_pair_from_json(row));
  auto policy = dto::make_backend(cfg.policy);
  dto::LogprobSource source = [&](std::string_view prompt, std::string_view response) {
    std::vector<double> lp;
    for (const auto& t : policy->score(prompt, response)) lp.push_back(t.logprob);
    return lp;
  };
  auto scores = dto::score_dataset(pairs, source, cfg.simpo);
  std::vector<json> rows;
  for (const auto& s : scores.scored) rows.push_back(dto::to_json(s));
  dto::write_file_atomic(out, dto::to_jsonl(rows));
  std::cout << dto::to_json(scores.summary).dump(2) << "\n";
  return 0;
}

std::vector<dto::ResponseRecord> read_records(const std::string& path, dto::Backend* counter) {
  std::vector<dto::ResponseRecord> out;
  for (const auto& row : dto::read_jsonl(path).rows) {
    dto::ResponseRecord r;
    r.problem_id = row.at("problem_id").get<std::string>();
    r.text = row.at("text").get<std::string>();
    if (row.contains("tokens")) {
      r.tokens = row["tokens"].get<std::size_t>();
    } else if (row.contains("token_count")) {
      r.tokens = row["token_count"].get<std::size_t>();
    } else if (counter) {
      r.tokens = counter->count_tokens(r.text);
    } else {
      throw dto::InvalidArgument(path + ": row without a token count");
    }
    out.push_back(std::move(r));
  }
  return out;
}

int cmd_evaluate(const Common& common, const std::string& dataset, const std::string& base_path,
                 const std::string& method_path, const std::string& out) {
  dto::RunConfig cfg = load_config(common);
  auto set = dto::load_problems(dataset, cfg.fields);
  std::map<std::string, dto::Problem> by_id;
  for (const auto& p : set.problems) by_id[p.id] = p;
  auto base = read_records(base_path, nullptr);
  auto method = read_records(method_path, nullptr);
  std::vector<dto::Problem> aligned;
  for (const auto& r : base) {
    auto it = by_id.find(r.problem_id);
    if (it == by_id.end()) throw dto::AlignmentError("unknown problem id " + r.problem_id);
    aligned.push_back(it->second);
  }
  auto report = dto::evaluate(fs::path(dataset).stem().string(), aligned, base, method, {}, cfg.evaluation);
  if (!out.empty()) dto::write_file_atomic(out, dto::to_json(report).dump(2) + "\n");
  std::cout << dto::render_report(report);
  return 0;
}

int cmd_report(const std::string& rows_path, const std::string& baseline, const std::string& title) {
  std::vector<dto::MethodRow> rows;
  for (const auto& row : dto::read_jsonl(rows_path).rows) {
    rows.push_back({row.at("method").get<std::string>(), row.at("accuracy").get<double>(),
                    row.at("tokens").get<double>(), std::nullopt});
  }
  std::cout << dto::render_table(title, dto::with_efficiency(rows, baseline));
  return 0;
}

int cmd_pipeline(const Common& common, const std::string& dataset, const std::string& out_dir,
                 std::optional<double> max_failure_rate) {
  dto::RunConfig cfg = load_config(common);
  if (max_failure_rate) {
    cfg.max_failure_rate = *max_failure_rate;
    cfg.validate();
  }
  Roles roles(cfg);
  auto summary = dto::run_pipeline(dataset, out_dir, cfg, roles.view());
  std::cerr << "manifest " << summary.manifest_id << ": " << summary.problems << " problems, "
            << summary.failed_problems << " failed, " << summary.pairs << " pairs\n";
  if (summary.failure_bound_exceeded) {
    std::cerr << "failure rate " << summary.failure_rate << " exceeds " << cfg.max_failure_rate << "\n";
    return kExitFailureBound;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic trajectory optimization for reasoning traces"};
  app.require_subcommand(1);

  Common common;
  std::string input = "-", dataset, out, samples, optimized, pairs, base, method, rows, baseline = "Base",
              title = "Results";
  std::optional<double> max_failure_rate;

  auto* seg = app.add_subcommand("segment", "Split one response into thinking patterns");
  add_common(seg, common);
  seg->add_option("input", input, "Response text file, or - for stdin");

  auto* smp = app.add_subcommand("sample", "Draw responses for every problem");
  add_common(smp, common);
  smp->add_option("--dataset", dataset)->required()->check(CLI::ExistingFile);
  smp->add_option("--out", out)->required();

  auto* opt = app.add_subcommand("optimize", "Truncate, finalize and prune selected responses");
  add_common(opt, common);
  opt->add_option("--dataset", dataset)->required()->check(CLI::ExistingFile);
  opt->add_option("--samples", samples)->required()->check(CLI::ExistingFile);
  opt->add_option("--out", out, "Output directory")->required();

  auto* bp = app.add_subcommand("build-pairs", "Pair optimized responses with the longest sample");
  add_common(bp, common);
  bp->add_option("--dataset", dataset)->required()->check(CLI::ExistingFile);
  bp->add_option("--samples", samples)->required()->check(CLI::ExistingFile);
  bp->add_option("--optimized", optimized)->required()->check(CLI::ExistingFile);
  bp->add_option("--out", out)->required();

  auto* sc = app.add_subcommand("score-simpo", "Score preference pairs with the policy backend");
  add_common(sc, common);
  sc->add_option("--pairs", pairs)->required()->check(CLI::ExistingFile);
  sc->add_option("--out", out)->required();

  auto* ev = app.add_subcommand("evaluate", "Compare base and method responses");
  add_common(ev, common);
  ev->add_option("--dataset", dataset)->required()->check(CLI::ExistingFile);
  ev->add_option("--base", base)->required()->check(CLI::ExistingFile);
  ev->add_option("--method", method)->required()->check(CLI::ExistingFile);
  ev->add_option("--out", out);

  auto* rp = app.add_subcommand("report", "Render an accuracy / length / efficiency table");
  rp->add_option("--rows", rows, "JSONL rows {method, accuracy, tokens}")->required()->check(CLI::ExistingFile);
  rp->add_option("--baseline", baseline);
  rp->add_option("--title", title);

  auto* pl = app.add_subcommand("pipeline", "Run every stage and write all artifacts");
  add_common(pl, common);
  pl->add_option("--dataset", dataset)->required()->check(CLI::ExistingFile);
  pl->add_option("--out", out, "Output directory")->required();
  pl->add_option("--max-failure-rate", max_failure_rate)->check(CLI::Range(0.0, 1.0));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*seg) return cmd_segment(common, input);
    if (*smp) return cmd_sample(common, dataset, out);
    if (*opt) return cmd_optimize(common, dataset, samples, out);
    if (*bp) return cmd_build_pairs(common, dataset, samples, optimized, out);
    if (*sc) return cmd_score_simpo(common, pairs, out);
    if (*ev) return cmd_evaluate(common, dataset, base, method, out);
    if (*rp) return cmd_report(rows, baseline, title);
    if (*pl) return cmd_pipeline(common, dataset, out, max_failure_rate);
  } catch (const dto::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
