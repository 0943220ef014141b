#include "dto/finalizer.hpp"

#include "dto/answer.hpp"
#include "dto/errors.hpp"
#include "dto/hash.hpp"

namespace dto {

void FinalizeConfig::validate() const {
  if (samples < 1) throw ConfigError("finalize.samples (K) must be >= 1");
  if (finalize_pattern.empty()) throw ConfigError("finalize.finalize_pattern must not be empty");
  completion_params.validate();
}

std::string FinalizedTrajectory::tail_text() const { return separator + finalize_pattern + closer.text; }

std::string FinalizedTrajectory::composed_text() const {
  return std::string(kept.think_text()) + tail_text();
}

FinalizedTrajectory finalize(const ProbeContext& ctx, const Trajectory& truncated,
                             const FinalizeConfig& cfg, const Problem& problem, Backend& backend) {
  cfg.validate();
  const std::string kept_text(truncated.think_text());

  GenerationRequest req;
  req.prompt = ctx.prompt_prefix + kept_text + cfg.separator + cfg.finalize_pattern;
  req.params = cfg.completion_params;
  req.params.n = cfg.samples;
  const std::uint64_t seed =
      mix_seed({ctx.seed, fnv1a64(problem.id), fnv1a64(kept_text), fnv1a64("finalize")});
  req.params.seed = seed;
  req.correlation_id = seed;

  GenerationResult result = sample(backend, std::move(req), cfg.strategy);

  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < result.completions.size(); ++k) {
    const auto& c = result.completions[k];
    if (!answer_matches(c.text, problem.ground_truth, cfg.match_policy)) continue;
    if (!best || c.tokens < result.completions[*best].tokens) best = k;
  }
  if (!best) {
    throw NoCorrectCompletion("none of " + std::to_string(result.completions.size()) +
                              " closers after segment " + std::to_string(truncated.size()) +
                              " contains the answer");
  }
  Completion closer = result.completions[*best];
  return FinalizedTrajectory{truncated,          cfg.separator, cfg.finalize_pattern,
                             std::move(closer),  *best,         std::move(result.completions)};
}

}  // namespace dto
