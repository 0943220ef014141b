#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dto/pair_builder.hpp"

namespace dto {

struct SimpoConfig {
  double beta = 10.0;
  double gamma = 3.0;  // absolute margin, not gamma/beta

  void validate() const;
};

struct SimpoTerms {
  double margin = 0.0;
  double loss = 0.0;
};

struct ScoredPair {
  std::string pair_id;
  double avg_logprob_chosen = 0.0;
  double avg_logprob_rejected = 0.0;
  double margin = 0.0;
  double loss = 0.0;
  bool preferred_ok = false;  // margin > 0
};

struct SimpoSummary {
  std::size_t pairs = 0;
  double mean_loss = 0.0;
  double mean_margin = 0.0;
  double fraction_preferred = 0.0;
};

struct SimpoScores {
  std::vector<ScoredPair> scored;
  SimpoSummary summary;
};

/// Token logprobs of `response` given `prompt`.
using LogprobSource = std::function<std::vector<double>(std::string_view prompt, std::string_view response)>;

/// ln(1 + e^x) without overflow.
double softplus(double x) noexcept;

/// Arithmetic mean. Throws EmptySequence on an empty list.
double average_logprob(std::span<const double> token_logprobs);

/// margin = β(avg_w − avg_l) − γ, loss = −ln σ(margin) = softplus(−margin).
SimpoTerms simpo_loss(double avg_chosen, double avg_rejected, const SimpoConfig& cfg);

/// Pairwise (cascade) summation.
double pairwise_sum(std::span<const double> values);

/// Scores every pair; pair ids are "<problem_id>/<k>" with k counting that
/// problem's pairs from 0. Throws EmptySequence for an empty dataset.
SimpoScores score_dataset(const std::vector<PreferencePair>& pairs, const LogprobSource& source,
                          const SimpoConfig& cfg);

nlohmann::json to_json(const ScoredPair& s);
nlohmann::json to_json(const SimpoSummary& s);

}  // namespace dto
