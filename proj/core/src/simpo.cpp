#include "dto/simpo.hpp"

#include <cmath>
#include <map>

#include "dto/errors.hpp"

namespace dto {

void SimpoConfig::validate() const {
  if (!(beta > 0.0)) throw ConfigError("simpo.beta must be > 0");
  if (!(gamma >= 0.0)) throw ConfigError("simpo.gamma must be >= 0");
}

double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double average_logprob(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) throw EmptySequence("average_logprob: no tokens");
  return pairwise_sum(token_logprobs) / static_cast<double>(token_logprobs.size());
}

SimpoTerms simpo_loss(double avg_chosen, double avg_rejected, const SimpoConfig& cfg) {
  const double margin = cfg.beta * (avg_chosen - avg_rejected) - cfg.gamma;
  return {margin, softplus(-margin)};
}

SimpoScores score_dataset(const std::vector<PreferencePair>& pairs, const LogprobSource& source,
                          const SimpoConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw EmptySequence("score_dataset: no pairs");
  SimpoScores out;
  std::map<std::string, std::size_t> per_problem;
  std::vector<double> losses;
  std::vector<double> margins;
  std::size_t preferred = 0;
  for (const auto& pair : pairs) {
    const auto chosen = source(pair.prompt, pair.chosen);
    const auto rejected = source(pair.prompt, pair.rejected);
    ScoredPair s;
    s.pair_id = pair.problem_id + "/" + std::to_string(per_problem[pair.problem_id]++);
    s.avg_logprob_chosen = average_logprob(chosen);
    s.avg_logprob_rejected = average_logprob(rejected);
    const auto terms = simpo_loss(s.avg_logprob_chosen, s.avg_logprob_rejected, cfg);
    s.margin = terms.margin;
    s.loss = terms.loss;
    s.preferred_ok = terms.margin > 0.0;
    preferred += s.preferred_ok ? 1 : 0;
    losses.push_back(s.loss);
    margins.push_back(s.margin);
    out.scored.push_back(std::move(s));
  }
  const auto count = static_cast<double>(pairs.size());
  out.summary.pairs = pairs.size();
  out.summary.mean_loss = pairwise_sum(losses) / count;
  out.summary.mean_margin = pairwise_sum(margins) / count;
  out.summary.fraction_preferred = static_cast<double>(preferred) / count;
  return out;
}

nlohmann::json to_json(const ScoredPair& s) {
  return {{"pair_id", s.pair_id}, {"margin", s.margin}, {"loss", s.loss}, {"preferred_ok", s.preferred_ok},
          {"avg_logprob_chosen", s.avg_logprob_chosen}, {"avg_logprob_rejected", s.avg_logprob_rejected}};
}

nlohmann::json to_json(const SimpoSummary& s) {
  return {{"pairs", s.pairs}, {"mean_loss", s.mean_loss}, {"mean_margin", s.mean_margin},
          {"fraction_preferred", s.fraction_preferred}};
}

}  // namespace dto
