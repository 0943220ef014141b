#include <gtest/gtest.h>

#include "dto/errors.hpp"
#include "dto/pair_builder.hpp"
#include "scenarios.hpp"
#include "test_support.hpp"

namespace dto {
namespace {

using testing::make_samples;
using testing::optimized_from;

std::vector<std::size_t> indices(const std::vector<SampledResponse>& v) {
  std::vector<std::size_t> out;
  for (const auto& s : v) out.push_back(s.sample_index);
  return out;
}

const AnswerMatchPolicy kBoxed{MatchMode::boxed_equality};

TEST(SelectTargets, ShortestCorrectWhenEnough) {
  auto s = make_samples({30, 10, 20, 10}, {true, true, true, true});
  EXPECT_EQ(indices(select_optimization_targets(s, 2, 0)), (std::vector<std::size_t>{1, 3}));
  auto t = make_samples({30, 25, 20, 40}, {true, false, true, true});
  EXPECT_EQ(indices(select_optimization_targets(t, 2, 0)), (std::vector<std::size_t>{0, 2}));
}

TEST(SelectTargets, FillsWithIncorrectWhenShort) {
  auto s = make_samples({30, 10, 20, 15}, {false, true, false, false});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto picked = select_optimization_targets(s, 2, seed);
    ASSERT_EQ(picked.size(), 2u);
    EXPECT_TRUE(picked[0].sample_index == 1 || picked[1].sample_index == 1);
    EXPECT_EQ(indices(picked), indices(select_optimization_targets(s, 2, seed)));  // deterministic
  }
}

TEST(SelectTargets, IncorrectDrawCoversAllCandidates) {
  auto s = make_samples({30, 10, 20, 15}, {false, false, false, false});
  std::set<std::vector<std::size_t>> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) seen.insert(indices(select_optimization_targets(s, 2, seed)));
  EXPECT_EQ(seen.size(), 6u);  // every 2-subset of 4
}

TEST(SelectTargets, Errors) {
  auto s = make_samples({3}, {true});
  EXPECT_THROW(select_optimization_targets(s, 2, 0), InsufficientSamples);
  EXPECT_THROW(select_optimization_targets(s, 0, 0), InvalidArgument);
}

TEST(BuildPairs, RejectedIsLongestRawEarliestOnTies) {
  auto s = make_samples({30, 50, 20, 50}, {true, true, false, true});
  std::vector<OptimizationOutcome> opt{optimized_from(s[0]), optimized_from(s[2])};
  auto built = build_pairs(testing::answer_problem(), "PROMPT", s, opt, 2, kBoxed);
  ASSERT_EQ(built.pairs.size(), 2u);
  for (const auto& p : built.pairs) {
    EXPECT_EQ(p.rejected, s[1].text);
    EXPECT_EQ(p.rejected_tokens, 50u);
    EXPECT_EQ(p.prompt, "PROMPT");
  }
  EXPECT_EQ(built.pairs[0].source, PairSource::from_correct);
  EXPECT_EQ(built.pairs[1].source, PairSource::from_incorrect);
}

TEST(BuildPairs, DropReasons) {
  auto s = make_samples({30, 50, 20, 40}, {true, true, true, true});
  OptimizationOutcome failed{0, std::nullopt, "boom"};
  OptimizationOutcome wrong = optimized_from(s[2]);
  wrong.trajectory->text = "short \\boxed{41}";
  OptimizationOutcome same = optimized_from(s[3]);
  same.trajectory->text = s[1].text;
  auto built = build_pairs(testing::answer_problem(), "P", s, {failed, wrong, same}, 2, kBoxed);
  EXPECT_TRUE(built.pairs.empty());
  ASSERT_EQ(built.drops.size(), 3u);
  EXPECT_EQ(built.drops[0].reason, DropReason::optimization_failed);
  EXPECT_EQ(built.drops[1].reason, DropReason::chosen_incorrect);
  EXPECT_EQ(built.drops[2].reason, DropReason::degenerate);
}

// N_c correct among 4 samples with N = 2: targets are the shortest correct
// ones topped up with incorrect ones, and each successfully optimized target
// yields one pair against the longest raw sample.
TEST(BuildPairs, ScenariosByCorrectCount) {
  const std::vector<std::size_t> words{40, 25, 60, 35};
  for (std::size_t nc = 0; nc <= 4; ++nc) {
    std::vector<bool> correct(4, false);
    for (std::size_t k = 0; k < nc; ++k) correct[k] = true;
    auto s = make_samples(words, correct);
    auto targets = select_optimization_targets(s, 2, 11);
    ASSERT_EQ(targets.size(), 2u);
    std::size_t correct_targets = 0;
    for (const auto& t : targets) correct_targets += t.correct ? 1 : 0;
    EXPECT_EQ(correct_targets, std::min<std::size_t>(nc, 2)) << "N_c=" << nc;
    if (nc >= 2) {
      // Two shortest among the correct ones.
      std::vector<std::pair<std::size_t, std::size_t>> c;
      for (std::size_t k = 0; k < nc; ++k) c.push_back({words[k], k});
      std::sort(c.begin(), c.end());
      std::vector<std::size_t> want{c[0].second, c[1].second};
      std::sort(want.begin(), want.end());
      EXPECT_EQ(indices(targets), want);
    }
    std::vector<OptimizationOutcome> opt;
    for (const auto& t : targets) opt.push_back(optimized_from(t));
    auto built = build_pairs(testing::answer_problem(), "P", s, opt, 2, kBoxed);
    EXPECT_EQ(built.pairs.size(), 2u);
    for (const auto& p : built.pairs) {
      EXPECT_EQ(p.rejected, s[2].text);
      EXPECT_LT(p.chosen_tokens, p.rejected_tokens);
    }
  }
}

TEST(PairJson, RoundTrip) {
  PreferencePair p{"q", "prompt", "c", "r", 1, 9, PairSource::from_incorrect};
  auto j = to_json(p);
  EXPECT_EQ(j["source"], "from_incorrect");
  EXPECT_EQ(preference_pair_from_json(j), p);
  EXPECT_THROW(parse_pair_source("other"), InvalidArgument);
  auto s = make_samples({3}, {true})[0];
  auto back = sampled_response_from_json(to_json(s));
  EXPECT_EQ(back.text, s.text);
  EXPECT_EQ(back.token_count, 3u);
}

}  // namespace
}  // namespace dto
