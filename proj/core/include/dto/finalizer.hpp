#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dto/backend.hpp"
#include "dto/exit_probe.hpp"
#include "dto/types.hpp"

namespace dto {

inline constexpr std::string_view kDefaultFinalizePattern =
    "Hmm, I think this is enough to derive the final answer.";

struct FinalizeConfig {
  std::string finalize_pattern{kDefaultFinalizePattern};
  std::string separator = " ";  // inserted between the kept segments and the pattern
  int samples = 4;              // K
  SamplingParams completion_params{0.6, 0.95, 1024, 1, std::nullopt};
  AnswerMatchPolicy match_policy{};
  SampleStrategy strategy = SampleStrategy::single_request;

  void validate() const;
};

/// Truncated trajectory closed by the finalize pattern and the chosen closer.
struct FinalizedTrajectory {
  Trajectory kept;
  std::string separator;
  std::string finalize_pattern;
  Completion closer;
  std::size_t closer_sample = 0;  // position of the closer among the K samples
  std::vector<Completion> candidates;

  /// kept ⊕ separator ⊕ finalize_pattern ⊕ closer.text
  std::string composed_text() const;

  /// Text after the kept segments: separator ⊕ finalize_pattern ⊕ closer.text.
  std::string tail_text() const;
};

/// Samples K closers of prefix ⊕ truncated ⊕ separator ⊕ pattern and keeps
/// the correct one with the fewest tokens, earliest sample on ties. Throws
/// NoCorrectCompletion when none is correct.
FinalizedTrajectory finalize(const ProbeContext& ctx, const Trajectory& truncated,
                             const FinalizeConfig& cfg, const Problem& problem, Backend& backend);

}  // namespace dto
