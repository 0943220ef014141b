#include <gtest/gtest.h>

#include <atomic>

#include "dto/errors.hpp"
#include "dto/hash.hpp"
#include "dto/pruner.hpp"
#include "scenarios.hpp"
#include "test_support.hpp"

namespace dto {
namespace {

using testing::FnBackend;
using testing::Gen;

FnBackend fixed_judge(std::string reply) {
  return FnBackend([reply](const GenerationRequest&, std::size_t) { return reply; });
}

// Policy backend whose validation decode succeeds iff good(removed set).
template <typename Good>
FnBackend validator(const Trajectory& t, Good good) {
  return FnBackend([&t, good](const GenerationRequest& req, std::size_t) -> std::string {
    return good(testing::missing_segments(req.prompt, t)) ? "42}." : "41}.";
  });
}

TEST(RenderTemplate, PlaceholdersAndEscapes) {
  EXPECT_EQ(render_template("a {x} {{lit}} {y}", {{"x", "1"}, {"y", "2"}}), "a 1 {lit} 2");
  EXPECT_EQ(render_template("{ not a placeholder", {}), "{ not a placeholder");
  EXPECT_THROW(render_template("{missing}", {}), ConfigError);
}

TEST(JudgePrompt, ListsKeptChunksOnly) {
  Trajectory t = testing::numbered_trajectory(3);
  auto f = testing::finalized_over(t.prefix(2));
  const std::string prompt = render_judge_prompt(testing::answer_problem(), f);
  EXPECT_NE(prompt.find("[Chunk 1]\nFirst, case 1 holds.\n\n[Chunk 2]\nWait, case 2 holds."), std::string::npos);
  EXPECT_EQ(prompt.find("[Chunk 3]"), std::string::npos);
  EXPECT_NE(prompt.find("### Ground-Truth\n42"), std::string::npos);
  EXPECT_NE(prompt.find("\\boxed{...}"), std::string::npos);
  EXPECT_EQ(prompt.find(kDefaultFinalizePattern), std::string::npos);
}

TEST(ParseVerdicts, AcceptsAnyOrderAndOverrides) {
  auto v = parse_verdicts("[Chunk 2] REMOVE\n  [Chunk 1]   KEEP AS IS  \n[Chunk 2] KEEP AS IS\n", 2);
  EXPECT_EQ(v.per_chunk, (std::vector<Verdict>{Verdict::keep, Verdict::keep}));
}

TEST(ParseVerdicts, Errors) {
  EXPECT_THROW(parse_verdicts("[Chunk 1] KEEP AS IS\n", 2), JudgeParseError);
  EXPECT_THROW(parse_verdicts("[Chunk 3] REMOVE\n[Chunk 1] REMOVE\n[Chunk 2] REMOVE", 2), JudgeParseError);
  EXPECT_THROW(parse_verdicts("[Chunk 1] MAYBE\n", 1), JudgeParseError);
  EXPECT_THROW(parse_verdicts("[Chunk 0] REMOVE\n", 1), JudgeParseError);
  EXPECT_THROW(parse_verdicts("", 0), InvalidArgument);
}

TEST(ValidationText, StopsBeforeBoxedAnswer) {
  Trajectory t = testing::numbered_trajectory(3);
  auto f = testing::finalized_over(t, " So \\boxed{42}.");
  EXPECT_EQ(validation_text(f, {2}),
            "First, case 1 holds.\n\nWait, case 3 holds. " + std::string(kDefaultFinalizePattern) + " So ");
  auto plain = testing::finalized_over(t, " It is 42.");
  EXPECT_TRUE(validation_text(plain, {}).ends_with(" It is 42."));
}

TEST(Prune, RemovesValidatedChunks) {
  Trajectory t = testing::numbered_trajectory(4);
  auto f = testing::finalized_over(t);
  FnBackend judge = fixed_judge(testing::judge_reply({false, true, false, true}));
  FnBackend policy = validator(t, [](const std::set<std::size_t>& s) { return !s.contains(4); });
  auto out = prune({}, f, judge, policy, PruneConfig{}, testing::answer_problem());
  EXPECT_EQ(out.removed_indices, (std::vector<std::size_t>{2}));
  EXPECT_EQ(out.kept_indices, (std::vector<std::size_t>{1, 3, 4}));
  EXPECT_EQ(out.text, "First, case 1 holds.\n\nWait, case 3 holds.\n\nWait, case 4 holds." + f.tail_text());
  EXPECT_EQ(out.token_count, policy.count_tokens(out.text));
  EXPECT_EQ(out.prune_audit[1].validated, true);
  EXPECT_EQ(out.prune_audit[3].validated, false);
  EXPECT_FALSE(out.prune_audit[0].validated.has_value());
  EXPECT_EQ(out.final_check, true);
}

TEST(Prune, ValidationDecodeRequest) {
  Trajectory t = testing::numbered_trajectory(2);
  auto f = testing::finalized_over(t);
  FnBackend judge = fixed_judge(testing::judge_reply({false, true}));
  FnBackend policy = validator(t, [](const auto&) { return true; });
  prune({"P:", 3}, f, judge, policy, PruneConfig{}, testing::answer_problem());
  auto reqs = policy.requests();
  ASSERT_EQ(reqs.size(), 2u);  // leave-one-out, then the joint check
  EXPECT_EQ(reqs[0].prompt, "P:" + validation_text(f, {2}));
  EXPECT_EQ(reqs[0].params.max_tokens, 1 + 16);
  EXPECT_EQ(reqs[0].params.temperature, 0.0);
}

TEST(Prune, JointFailureRollsBackInOrder) {
  Trajectory t = testing::numbered_trajectory(4);
  auto f = testing::finalized_over(t);
  FnBackend judge = fixed_judge(testing::judge_reply({false, true, true, true}));
  // Each alone is fine; any two together break the answer.
  FnBackend policy = validator(t, [](const std::set<std::size_t>& s) { return s.size() <= 1; });
  auto out = prune({}, f, judge, policy, PruneConfig{}, testing::answer_problem());
  EXPECT_EQ(out.removed_indices, (std::vector<std::size_t>{4}));
  EXPECT_TRUE(out.prune_audit[1].rolled_back);
  EXPECT_TRUE(out.prune_audit[2].rolled_back);
  EXPECT_FALSE(out.prune_audit[3].rolled_back);
  EXPECT_EQ(out.final_check, true);
}

TEST(Prune, AlwaysKeepIsIdentity) {
  Trajectory t = testing::numbered_trajectory(5);
  auto f = testing::finalized_over(t);
  FnBackend judge = fixed_judge(testing::judge_reply(std::vector<bool>(5, false)));
  FnBackend policy = validator(t, [](const auto&) { return true; });
  auto out = prune({}, f, judge, policy, PruneConfig{}, testing::answer_problem());
  EXPECT_EQ(out.text, f.composed_text());
  EXPECT_TRUE(out.removed_indices.empty());
  EXPECT_TRUE(policy.requests().empty());
  EXPECT_FALSE(out.final_check.has_value());
}

TEST(Prune, UnparseableJudgeKeepsEverything) {
  Trajectory t = testing::numbered_trajectory(3);
  auto f = testing::finalized_over(t);
  FnBackend judge = fixed_judge("[Chunk 1] REMOVE\n");
  FnBackend policy = validator(t, [](const auto&) { return true; });
  auto out = prune({}, f, judge, policy, PruneConfig{}, testing::answer_problem());
  EXPECT_EQ(out.text, f.composed_text());
  ASSERT_TRUE(out.judge_error);
  EXPECT_EQ(*out.judge_error, "no verdict for chunk 2");
}

TEST(Prune, ProtectedFirstSegmentAndSkippedValidation) {
  Trajectory t = testing::numbered_trajectory(3);
  auto f = testing::finalized_over(t);
  FnBackend judge = fixed_judge(testing::judge_reply({true, true, false}));
  FnBackend policy = validator(t, [](const std::set<std::size_t>& s) { return !s.contains(2); });
  PruneConfig cfg;
  cfg.protect_first_segment = true;
  cfg.validate_each = false;
  auto out = prune({}, f, judge, policy, cfg, testing::answer_problem());
  EXPECT_TRUE(out.prune_audit[0].is_protected);
  // Without leave-one-out the joint check is the only guard.
  EXPECT_TRUE(out.removed_indices.empty());
  EXPECT_TRUE(out.prune_audit[1].rolled_back);
}

// Random verdicts over a random (non-monotone) success table. The result
// must match a brute-force replay of the rule, every removed chunk must
// have passed alone, and the final removal set must decode the answer.
TEST(Prune, RandomTablesMatchReference) {
  Gen g(77);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = g.between(1, 7);
    Trajectory t = testing::numbered_trajectory(n);
    auto f = testing::finalized_over(t);
    std::vector<bool> remove(n);
    for (std::size_t i = 0; i < n; ++i) remove[i] = g.coin(0.6);
    const std::uint64_t table_seed = g.engine()();
    auto good = [table_seed](const std::set<std::size_t>& s) {
      std::uint64_t key = 0;
      for (std::size_t i : s) key |= std::uint64_t{1} << i;
      const double threshold = s.size() == 1 ? 0.7 : 0.45;
      return static_cast<double>(mix_seed({table_seed, key}) % 1000) / 1000.0 < threshold;
    };
    FnBackend judge = fixed_judge(testing::judge_reply(remove));
    FnBackend policy = validator(t, good);
    PruneConfig cfg;
    cfg.parallel_validations = g.coin();
    auto out = prune({}, f, judge, policy, cfg, testing::answer_problem());

    std::set<std::size_t> expect;
    for (std::size_t i = 1; i <= n; ++i) {
      if (remove[i - 1] && good({i})) expect.insert(i);
    }
    if (!expect.empty()) {
      const std::vector<std::size_t> order(expect.begin(), expect.end());
      for (std::size_t i : order) {
        if (good(expect)) break;
        expect.erase(i);
      }
    }
    const std::set<std::size_t> got(out.removed_indices.begin(), out.removed_indices.end());
    ASSERT_EQ(got, expect) << "trial " << trial;
    for (std::size_t i : got) ASSERT_TRUE(good({i}));
    if (!got.empty()) ASSERT_TRUE(good(got));
  }
}

}  // namespace
}  // namespace dto
