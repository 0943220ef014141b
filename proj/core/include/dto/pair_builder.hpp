#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dto/pruner.hpp"
#include "dto/types.hpp"

namespace dto {

struct SampledResponse {
  std::string problem_id;
  std::size_t sample_index = 0;
  std::string text;
  bool correct = false;
  std::size_t token_count = 0;
};

enum class PairSource { from_correct, from_incorrect };

std::string_view to_string(PairSource s) noexcept;
PairSource parse_pair_source(std::string_view text);

struct PreferencePair {
  std::string problem_id;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  std::size_t chosen_tokens = 0;
  std::size_t rejected_tokens = 0;
  PairSource source = PairSource::from_correct;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

/// Outcome of optimizing one selected response; `trajectory` is empty when
/// optimization aborted.
struct OptimizationOutcome {
  std::size_t sample_index = 0;
  std::optional<OptimizedTrajectory> trajectory;
  std::string failure;
};

enum class DropReason { optimization_failed, chosen_incorrect, degenerate };

std::string_view to_string(DropReason r) noexcept;

struct PairDrop {
  std::string problem_id;
  std::size_t sample_index = 0;
  DropReason reason = DropReason::optimization_failed;
};

struct PairBuild {
  std::vector<PreferencePair> pairs;
  std::vector<PairDrop> drops;
};

/// N shortest correct responses (ties by sample index) when at least N are
/// correct; otherwise every correct one plus N - N_c incorrect ones drawn
/// uniformly with `seed`. Output is ordered by sample index. Throws
/// InsufficientSamples when fewer than N samples exist.
std::vector<SampledResponse> select_optimization_targets(const std::vector<SampledResponse>& samples,
                                                         std::size_t N, std::uint64_t seed);

/// One pair per optimized target whose text is correct. The rejected side is
/// the longest raw sample (earliest on ties), shared by all of the problem's
/// pairs.
PairBuild build_pairs(const Problem& problem, const std::string& prompt,
                      const std::vector<SampledResponse>& samples,
                      const std::vector<OptimizationOutcome>& optimized, std::size_t N,
                      const AnswerMatchPolicy& policy);

nlohmann::json to_json(const PreferencePair& pair);
PreferencePair preference_pair_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SampledResponse& s);
SampledResponse sampled_response_from_json(const nlohmann::json& j);

}  // namespace dto
