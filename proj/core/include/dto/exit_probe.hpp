#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dto/backend.hpp"
#include "dto/types.hpp"

namespace dto {

inline constexpr std::string_view kDefaultExitPattern =
    "... Wait, I suddenly got the final answer to the whole problem. Final Answer: \\boxed{";

struct ExitConfig {
  std::string exit_pattern{kDefaultExitPattern};
  int samples = 10;           // M
  double threshold = 1.0;     // T
  int answer_margin_tokens = 16;
  AnswerMatchPolicy match_policy{};  // containment
  SamplingParams sampling{};         // temperature/top_p; n and max_tokens are set per probe
  SampleStrategy strategy = SampleStrategy::single_request;
  int window = 1;  // indices probed concurrently; 1 is the plain sequential scan

  void validate() const;
};

/// Monte Carlo estimate for one prefix length.
struct ProbeResult {
  std::size_t index = 0;
  std::size_t hits = 0;
  std::size_t samples = 0;
  std::vector<Completion> completions;

  /// hits / samples, formed by a single division.
  double p() const noexcept { return static_cast<double>(hits) / static_cast<double>(samples); }
  bool meets(double threshold) const noexcept { return p() >= threshold; }
};

struct TruncationDecision {
  std::size_t i_prime = 0;
  bool qualified = false;
  std::vector<ProbeResult> probes;  // every probe evaluated, ascending index

  /// Largest evaluated p, as the (hits, samples) pair that attains it.
  std::pair<std::size_t, std::size_t> max_p_fraction() const;
  double max_p() const;
};

/// Shared context for every backend call made on behalf of one trajectory.
struct ProbeContext {
  std::string prompt_prefix;
  std::uint64_t seed = 0;  // base for per-(trajectory, index) seeds
};

/// δ_1 ⊕ … ⊕ δ_i ⊕ exit_pattern. Throws IndexOutOfRange unless 1 <= i <= n.
std::string build_partial(const Trajectory& trajectory, std::size_t i, std::string_view exit_pattern);

/// Samples M completions of prefix ⊕ build_partial(i) with a budget of
/// count_tokens(answer) + margin and counts the ones matching the answer.
ProbeResult probe_index(const ProbeContext& ctx, const Trajectory& trajectory, std::size_t i,
                        const ExitConfig& cfg, const Problem& problem, Backend& backend);

/// Earliest index in [first, n] whose p meets the threshold. Without one,
/// i_prime = n and qualified = false. Probing `window` indices at a time
/// returns the same decision as the sequential scan.
TruncationDecision find_truncation(const ProbeContext& ctx, const Trajectory& trajectory,
                                   const ExitConfig& cfg, const Problem& problem, Backend& backend,
                                   std::size_t first = 1);

/// Segments 1..i_prime.
Trajectory truncate(const Trajectory& trajectory, const TruncationDecision& decision);

/// f over segment indices: true for i <= i_prime.
std::vector<bool> selection_mask(std::size_t n, std::size_t i_prime);

/// {problem_id, sample, index, p, hits, M, qualified}
nlohmann::json probe_audit_record(std::string_view problem_id, std::size_t sample_index,
                                  const ProbeResult& probe, double threshold);

}  // namespace dto
