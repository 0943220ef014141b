#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dto/backend.hpp"
#include "dto/config.hpp"
#include "dto/metrics.hpp"
#include "dto/pair_builder.hpp"
#include "dto/pruner.hpp"

namespace dto {

struct Backends {
  Backend& policy;
  Backend& judge;
};

/// Rendered task prompt x.
std::string task_prompt(const RunConfig& cfg, const Problem& problem);

/// x followed by the assistant prefix: the text every policy call continues.
std::string conditioning_prefix(const RunConfig& cfg, const Problem& problem);

/// Draws samples_per_problem responses and labels them with the evaluation
/// match policy.
std::vector<SampledResponse> sample_responses(const Problem& problem, const RunConfig& cfg, Backend& policy);

/// Seed for drawing incorrect fill-in targets of `problem`.
std::uint64_t target_seed(const RunConfig& cfg, const Problem& problem);

/// Audit trail of one optimization, filled even when it fails.
struct OptimizeAudit {
  std::vector<nlohmann::json> probes;
  std::vector<nlohmann::json> prunes;
  std::optional<std::pair<std::size_t, std::size_t>> max_p;
};

/// Segment, truncate at the first confident exit, finalize and prune.
///
/// When no closer of the kept prefix is correct, the scan resumes past i'
/// and, as a last resort, keeps the whole trajectory. Throws
/// OptimizationFailed when even that has no correct closer.
OptimizedTrajectory optimize_response(const Problem& problem, const SampledResponse& response,
                                      const RunConfig& cfg, Backends backends, OptimizeAudit* audit = nullptr);

struct ProblemResult {
  Problem problem;
  std::vector<SampledResponse> samples;
  std::vector<SampledResponse> targets;
  std::vector<OptimizationOutcome> outcomes;
  std::vector<std::optional<std::pair<std::size_t, std::size_t>>> max_p;  // per target
  PairBuild pairs;
  std::vector<nlohmann::json> probe_audit;
  std::vector<nlohmann::json> prune_audit;
  std::optional<std::string> error;  // set when the problem could not be processed

  /// True when sampling failed or no target was optimized.
  bool failed() const;
};

/// Optimizes every target of one problem, given its samples.
ProblemResult optimize_problem(const Problem& problem, std::vector<SampledResponse> samples,
                               const RunConfig& cfg, Backends backends);

/// sample_responses followed by optimize_problem; errors land in `error`.
ProblemResult process_problem(const Problem& problem, const RunConfig& cfg, Backends backends);

/// Runs `fn(i)` for i in [0, count) on `workers` threads.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

/// Report over the optimization targets: the raw responses against their
/// optimized forms, falling back to the raw text where optimization failed.
EfficiencyReport build_report(const std::string& dataset, const std::vector<ProblemResult>& results,
                              const RunConfig& cfg);

/// JSON row of optimized.jsonl.
nlohmann::json to_json(const OptimizedTrajectory& t);
OptimizedTrajectory optimized_trajectory_from_json(const nlohmann::json& j);

struct RunSummary {
  std::string manifest_id;
  std::size_t problems = 0;
  std::size_t skipped_rows = 0;
  std::size_t failed_problems = 0;
  std::size_t pairs = 0;
  double failure_rate = 0.0;
  bool failure_bound_exceeded = false;
  EfficiencyReport report;
};

/// Processes the dataset and writes samples.jsonl, optimized.jsonl,
/// pairs.jsonl, probe_audit.jsonl, prune_audit.jsonl, report.json,
/// report.txt and manifest.json into `out_dir`, each written atomically.
RunSummary run_pipeline(const std::filesystem::path& dataset, const std::filesystem::path& out_dir,
                        const RunConfig& cfg, Backends backends);

/// Deterministic id of a run: config, backend identities, dataset bytes and
/// seed.
std::string manifest_id(const RunConfig& cfg, std::uint64_t dataset_hash);

}  // namespace dto
