#include "dto/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "dto/answer.hpp"
#include "dto/errors.hpp"
#include "dto/exit_probe.hpp"
#include "dto/finalizer.hpp"
#include "dto/hash.hpp"
#include "dto/io.hpp"
#include "dto/segmenter.hpp"

namespace dto {

using nlohmann::json;

std::string task_prompt(const RunConfig& cfg, const Problem& problem) {
  return render_task_prompt(cfg.prompt_template, problem.statement);
}

std::string conditioning_prefix(const RunConfig& cfg, const Problem& problem) {
  return task_prompt(cfg, problem) + cfg.assistant_prefix;
}

std::vector<SampledResponse> sample_responses(const Problem& problem, const RunConfig& cfg, Backend& policy) {
  GenerationRequest req;
  req.prompt = conditioning_prefix(cfg, problem);
  req.params = cfg.sampling;
  req.params.n = static_cast<int>(cfg.samples_per_problem);
  req.params.seed = mix_seed({cfg.run_seed, fnv1a64(problem.id), fnv1a64("sample")});
  req.correlation_id = *req.params.seed;
  GenerationResult result = sample(policy, req, cfg.sample_strategy);

  std::vector<SampledResponse> out;
  out.reserve(result.completions.size());
  for (std::size_t k = 0; k < result.completions.size(); ++k) {
    const Completion& c = result.completions[k];
    SampledResponse s;
    s.problem_id = problem.id;
    s.sample_index = k;
    s.text = c.text;
    s.correct = answer_matches(c.text, problem.ground_truth, cfg.evaluation.match_policy);
    s.token_count = c.tokens > 0 ? c.tokens : policy.count_tokens(c.text);
    out.push_back(std::move(s));
  }
  return out;
}

OptimizedTrajectory optimize_response(const Problem& problem, const SampledResponse& response,
                                      const RunConfig& cfg, Backends backends, OptimizeAudit* audit) {
  OptimizeAudit local;
  OptimizeAudit& log = audit ? *audit : local;

  std::optional<Trajectory> parsed;
  try {
    parsed = segment_response(response.text, cfg.lexicon(), cfg.framing);
  } catch (const EmptyInput& e) {
    throw OptimizationFailed(std::string("empty deliberation: ") + e.what());
  }
  const Trajectory& traj = *parsed;
  const std::size_t n = traj.size();

  ProbeContext ctx{conditioning_prefix(cfg, problem), mix_seed({cfg.run_seed, response.sample_index})};

  std::vector<ProbeResult> all_probes;
  auto record = [&](const TruncationDecision& d) {
    for (const auto& p : d.probes) {
      log.probes.push_back(probe_audit_record(problem.id, response.sample_index, p, cfg.exit.threshold));
      all_probes.push_back(p);
    }
    if (!all_probes.empty()) {
      TruncationDecision merged;
      merged.probes = all_probes;
      log.max_p = merged.max_p_fraction();
    }
  };

  TruncationDecision decision = find_truncation(ctx, traj, cfg.exit, problem, backends.policy);
  record(decision);

  std::vector<std::size_t> attempts;
  std::optional<FinalizedTrajectory> finalized;
  while (true) {
    attempts.push_back(decision.i_prime);
    try {
      finalized = finalize(ctx, truncate(traj, decision), cfg.finalize, problem, backends.policy);
      break;
    } catch (const NoCorrectCompletion&) {
      if (decision.i_prime >= n) {
        throw OptimizationFailed("no correct closer for any kept prefix (tried i' = " +
                                 std::to_string(attempts.front()) + ".." + std::to_string(n) + ")");
      }
    }
    // Resume the scan past the failed index; without a later qualifying
    // index this lands on i' = n.
    decision = find_truncation(ctx, traj, cfg.exit, problem, backends.policy, decision.i_prime + 1);
    record(decision);
  }

  OptimizedTrajectory out = prune(ctx, *finalized, backends.judge, backends.policy, cfg.prune, problem);
  out.sample_index = response.sample_index;
  out.i_prime = decision.i_prime;
  out.qualified = decision.qualified;
  out.source_segments = n;
  out.source_tokens = response.token_count;
  out.source_correct = response.correct;
  if (log.max_p) out.max_p = *log.max_p;
  out.finalize_attempts = attempts;
  for (const auto& entry : out.prune_audit) {
    log.prunes.push_back(prune_audit_record(problem.id, response.sample_index, entry));
  }
  return out;
}

std::uint64_t target_seed(const RunConfig& cfg, const Problem& problem) {
  return mix_seed({cfg.run_seed, fnv1a64(problem.id), fnv1a64("targets")});
}

bool ProblemResult::failed() const {
  if (error) return true;
  return std::none_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.trajectory.has_value(); });
}

ProblemResult optimize_problem(const Problem& problem, std::vector<SampledResponse> samples,
                               const RunConfig& cfg, Backends backends) {
  ProblemResult r;
  r.problem = problem;
  r.samples = std::move(samples);
  r.targets = select_optimization_targets(r.samples, cfg.N, target_seed(cfg, problem));
  for (const auto& target : r.targets) {
    OptimizationOutcome outcome;
    outcome.sample_index = target.sample_index;
    OptimizeAudit audit;
    try {
      outcome.trajectory = optimize_response(problem, target, cfg, backends, &audit);
    } catch (const Error& e) {
      outcome.failure = e.what();
    }
    r.max_p.push_back(audit.max_p);
    for (auto& row : audit.probes) r.probe_audit.push_back(std::move(row));
    for (auto& row : audit.prunes) r.prune_audit.push_back(std::move(row));
    r.outcomes.push_back(std::move(outcome));
  }
  r.pairs = build_pairs(problem, conditioning_prefix(cfg, problem), r.samples, r.outcomes, cfg.N,
                        cfg.evaluation.match_policy);
  return r;
}

ProblemResult process_problem(const Problem& problem, const RunConfig& cfg, Backends backends) {
  try {
    return optimize_problem(problem, sample_responses(problem, cfg, backends.policy), cfg, backends);
  } catch (const Error& e) {
    ProblemResult r;
    r.problem = problem;
    r.error = e.what();
    return r;
  }
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(std::max(workers, 1), std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  auto run = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

EfficiencyReport build_report(const std::string& dataset, const std::vector<ProblemResult>& results,
                              const RunConfig& cfg) {
  std::vector<Problem> problems;
  std::vector<ResponseRecord> base;
  std::vector<ResponseRecord> method;
  std::vector<std::pair<std::size_t, std::size_t>> max_p;
  for (const auto& r : results) {
    if (r.error) continue;
    for (std::size_t k = 0; k < r.targets.size(); ++k) {
      const auto& target = r.targets[k];
      const auto& outcome = r.outcomes[k];
      problems.push_back(r.problem);
      base.push_back({r.problem.id, target.text, target.token_count});
      if (outcome.trajectory) {
        method.push_back({r.problem.id, outcome.trajectory->text, outcome.trajectory->token_count});
      } else {
        method.push_back({r.problem.id, target.text, target.token_count});
      }
      if (!target.correct && r.max_p[k]) max_p.push_back(*r.max_p[k]);
    }
  }
  return evaluate(dataset, problems, base, method, max_p, cfg.evaluation);
}

json to_json(const OptimizedTrajectory& t) {
  json j = {{"problem_id", t.problem_id},
            {"sample_index", t.sample_index},
            {"text", t.text},
            {"token_count", t.token_count},
            {"source_tokens", t.source_tokens},
            {"source_correct", t.source_correct},
            {"source_segments", t.source_segments},
            {"i_prime", t.i_prime},
            {"qualified", t.qualified},
            {"kept", t.kept_indices},
            {"removed", t.removed_indices},
            {"max_p", {t.max_p.first, t.max_p.second}},
            {"finalize_attempts", t.finalize_attempts},
            {"closer_tokens", t.closer_tokens}};
  j["judge_error"] = t.judge_error ? json(*t.judge_error) : json(nullptr);
  j["final_check"] = t.final_check ? json(*t.final_check) : json(nullptr);
  return j;
}

OptimizedTrajectory optimized_trajectory_from_json(const json& j) {
  try {
    OptimizedTrajectory t;
    t.problem_id = j.at("problem_id").get<std::string>();
    t.sample_index = j.at("sample_index").get<std::size_t>();
    t.text = j.at("text").get<std::string>();
    t.token_count = j.at("token_count").get<std::size_t>();
    t.source_tokens = j.value("source_tokens", std::size_t{0});
    t.source_correct = j.value("source_correct", false);
    t.source_segments = j.value("source_segments", std::size_t{0});
    t.i_prime = j.value("i_prime", std::size_t{0});
    t.qualified = j.value("qualified", false);
    t.kept_indices = j.value("kept", std::vector<std::size_t>{});
    t.removed_indices = j.value("removed", std::vector<std::size_t>{});
    if (j.contains("max_p")) t.max_p = {j["max_p"].at(0).get<std::size_t>(), j["max_p"].at(1).get<std::size_t>()};
    t.finalize_attempts = j.value("finalize_attempts", std::vector<std::size_t>{});
    t.closer_tokens = j.value("closer_tokens", std::size_t{0});
    if (j.contains("judge_error") && j["judge_error"].is_string()) t.judge_error = j["judge_error"].get<std::string>();
    if (j.contains("final_check") && j["final_check"].is_boolean()) t.final_check = j["final_check"].get<bool>();
    return t;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad optimized trajectory row: ") + e.what());
  }
}

std::string manifest_id(const RunConfig& cfg, std::uint64_t dataset_hash) {
  return to_hex(mix_seed({config_hash(cfg), fnv1a64(backend_identity(cfg.policy)),
                          fnv1a64(backend_identity(cfg.judge)), dataset_hash, cfg.run_seed}));
}

namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

json tagged(json row, const std::string& id) {
  row["manifest_id"] = id;
  return row;
}

}  // namespace

RunSummary run_pipeline(const std::filesystem::path& dataset, const std::filesystem::path& out_dir,
                        const RunConfig& cfg, Backends backends) {
  const std::string started = utc_now();
  ProblemSet set = load_problems(dataset, cfg.fields);
  const std::uint64_t dataset_hash = hash_file(dataset);
  RunSummary summary;
  summary.manifest_id = manifest_id(cfg, dataset_hash);
  summary.problems = set.problems.size();
  summary.skipped_rows = set.skipped;

  std::vector<ProblemResult> results(set.problems.size());
  parallel_for(set.problems.size(), cfg.workers,
               [&](std::size_t i) { results[i] = process_problem(set.problems[i], cfg, backends); });
  std::sort(results.begin(), results.end(),
            [](const ProblemResult& a, const ProblemResult& b) { return a.problem.id < b.problem.id; });

  const std::string& id = summary.manifest_id;
  std::vector<json> samples, optimized, pairs, probes, prunes, failures;
  std::map<std::string, std::size_t> drop_counts;
  for (const auto& r : results) {
    if (r.failed()) ++summary.failed_problems;
    if (r.error) {
      failures.push_back({{"problem_id", r.problem.id}, {"sample", nullptr}, {"reason", *r.error}});
      continue;
    }
    for (const auto& s : r.samples) samples.push_back(tagged(to_json(s), id));
    for (const auto& o : r.outcomes) {
      if (!o.trajectory) {
        failures.push_back({{"problem_id", r.problem.id}, {"sample", o.sample_index}, {"reason", o.failure}});
        continue;
      }
      if (answer_matches(o.trajectory->text, r.problem.ground_truth, cfg.evaluation.match_policy)) {
        optimized.push_back(tagged(to_json(*o.trajectory), id));
      }
    }
    for (const auto& p : r.pairs.pairs) pairs.push_back(to_json(p));
    for (const auto& d : r.pairs.drops) ++drop_counts[std::string(to_string(d.reason))];
    for (const auto& row : r.probe_audit) probes.push_back(tagged(row, id));
    for (const auto& row : r.prune_audit) prunes.push_back(tagged(row, id));
  }
  summary.pairs = pairs.size();
  summary.failure_rate = summary.problems == 0
                             ? 0.0
                             : static_cast<double>(summary.failed_problems) / static_cast<double>(summary.problems);
  summary.failure_bound_exceeded = summary.failure_rate > cfg.max_failure_rate;
  summary.report = build_report(dataset.stem().string(), results, cfg);

  json report = to_json(summary.report);
  report["manifest_id"] = id;

  json manifest = {{"manifest_id", id},
                   {"config_hash", to_hex(config_hash(cfg))},
                   {"policy_backend", backend_identity(cfg.policy)},
                   {"judge_backend", backend_identity(cfg.judge)},
                   {"dataset", dataset.string()},
                   {"dataset_hash", to_hex(dataset_hash)},
                   {"run_seed", cfg.run_seed},
                   {"started_at", started},
                   {"finished_at", utc_now()},
                   {"problems", summary.problems},
                   {"skipped_rows", summary.skipped_rows},
                   {"failed_problems", summary.failed_problems},
                   {"failure_rate", summary.failure_rate},
                   {"max_failure_rate", cfg.max_failure_rate},
                   {"failure_bound_exceeded", summary.failure_bound_exceeded},
                   {"pairs", summary.pairs},
                   {"pair_drops", drop_counts},
                   {"failures", failures},
                   {"config", to_json(cfg)}};

  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "samples.jsonl", to_jsonl(samples));
  write_file_atomic(out_dir / "optimized.jsonl", to_jsonl(optimized));
  write_file_atomic(out_dir / "pairs.jsonl", to_jsonl(pairs));
  write_file_atomic(out_dir / "probe_audit.jsonl", to_jsonl(probes));
  write_file_atomic(out_dir / "prune_audit.jsonl", to_jsonl(prunes));
  write_file_atomic(out_dir / "report.json", report.dump(2) + "\n");
  write_file_atomic(out_dir / "report.txt", render_report(summary.report));
  write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return summary;
}

}  // namespace dto
