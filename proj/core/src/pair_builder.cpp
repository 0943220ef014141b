#include "dto/pair_builder.hpp"

#include <algorithm>
#include <random>

#include "dto/answer.hpp"
#include "dto/errors.hpp"

namespace dto {

std::string_view to_string(PairSource s) noexcept {
  return s == PairSource::from_incorrect ? "from_incorrect" : "from_correct";
}

PairSource parse_pair_source(std::string_view text) {
  if (text == "from_correct") return PairSource::from_correct;
  if (text == "from_incorrect") return PairSource::from_incorrect;
  throw InvalidArgument("unknown pair source: " + std::string(text));
}

std::string_view to_string(DropReason r) noexcept {
  switch (r) {
    case DropReason::optimization_failed: return "optimization_failed";
    case DropReason::chosen_incorrect: return "chosen_incorrect";
    case DropReason::degenerate: return "degenerate";
  }
  return "optimization_failed";
}

std::vector<SampledResponse> select_optimization_targets(const std::vector<SampledResponse>& samples,
                                                         std::size_t N, std::uint64_t seed) {
  if (N == 0) throw InvalidArgument("N must be >= 1");
  if (samples.size() < N) {
    throw InsufficientSamples("need " + std::to_string(N) + " samples, have " +
                              std::to_string(samples.size()));
  }
  std::vector<SampledResponse> correct;
  std::vector<SampledResponse> incorrect;
  for (const auto& s : samples) (s.correct ? correct : incorrect).push_back(s);

  auto by_index = [](const SampledResponse& a, const SampledResponse& b) {
    return a.sample_index < b.sample_index;
  };
  std::vector<SampledResponse> chosen;
  if (correct.size() >= N) {
    std::stable_sort(correct.begin(), correct.end(), [](const auto& a, const auto& b) {
      return a.token_count != b.token_count ? a.token_count < b.token_count
                                            : a.sample_index < b.sample_index;
    });
    chosen.assign(correct.begin(), correct.begin() + static_cast<std::ptrdiff_t>(N));
  } else {
    chosen = correct;
    std::sort(incorrect.begin(), incorrect.end(), by_index);
    // Partial Fisher-Yates on raw engine output, which the standard pins down.
    std::mt19937_64 rng(seed);
    const std::size_t need = N - correct.size();
    for (std::size_t k = 0; k < need; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng() % (incorrect.size() - k));
      std::swap(incorrect[k], incorrect[j]);
      chosen.push_back(incorrect[k]);
    }
  }
  std::sort(chosen.begin(), chosen.end(), by_index);
  return chosen;
}

PairBuild build_pairs(const Problem& problem, const std::string& prompt,
                      const std::vector<SampledResponse>& samples,
                      const std::vector<OptimizationOutcome>& optimized, std::size_t N,
                      const AnswerMatchPolicy& policy) {
  PairBuild out;
  if (samples.empty()) return out;

  const SampledResponse* longest = &samples.front();
  for (const auto& s : samples) {
    if (s.token_count > longest->token_count) longest = &s;
  }

  for (const auto& outcome : optimized) {
    auto source = std::find_if(samples.begin(), samples.end(), [&](const SampledResponse& s) {
      return s.sample_index == outcome.sample_index;
    });
    if (!outcome.trajectory) {
      out.drops.push_back({problem.id, outcome.sample_index, DropReason::optimization_failed});
      continue;
    }
    const auto& traj = *outcome.trajectory;
    if (!answer_matches(traj.text, problem.ground_truth, policy)) {
      out.drops.push_back({problem.id, outcome.sample_index, DropReason::chosen_incorrect});
      continue;
    }
    if (traj.text == longest->text) {
      out.drops.push_back({problem.id, outcome.sample_index, DropReason::degenerate});
      continue;
    }
    if (out.pairs.size() >= N) break;
    const bool was_correct = source != samples.end() ? source->correct : traj.source_correct;
    out.pairs.push_back(PreferencePair{problem.id, prompt, traj.text, longest->text, traj.token_count,
                                       longest->token_count,
                                       was_correct ? PairSource::from_correct : PairSource::from_incorrect});
  }
  return out;
}

nlohmann::json to_json(const PreferencePair& p) {
  return {{"problem_id", p.problem_id}, {"prompt", p.prompt},
          {"chosen", p.chosen},         {"rejected", p.rejected},
          {"chosen_tokens", p.chosen_tokens}, {"rejected_tokens", p.rejected_tokens},
          {"source", to_string(p.source)}};
}

PreferencePair preference_pair_from_json(const nlohmann::json& j) {
  PreferencePair p;
  p.problem_id = j.at("problem_id").get<std::string>();
  p.prompt = j.at("prompt").get<std::string>();
  p.chosen = j.at("chosen").get<std::string>();
  p.rejected = j.at("rejected").get<std::string>();
  p.chosen_tokens = j.at("chosen_tokens").get<std::size_t>();
  p.rejected_tokens = j.at("rejected_tokens").get<std::size_t>();
  p.source = parse_pair_source(j.at("source").get<std::string>());
  return p;
}

nlohmann::json to_json(const SampledResponse& s) {
  return {{"problem_id", s.problem_id}, {"sample_index", s.sample_index}, {"text", s.text},
          {"correct", s.correct},       {"token_count", s.token_count}};
}

SampledResponse sampled_response_from_json(const nlohmann::json& j) {
  SampledResponse s;
  s.problem_id = j.at("problem_id").get<std::string>();
  s.sample_index = j.at("sample_index").get<std::size_t>();
  s.text = j.at("text").get<std::string>();
  s.correct = j.at("correct").get<bool>();
  s.token_count = j.at("token_count").get<std::size_t>();
  return s;
}

}  // namespace dto
