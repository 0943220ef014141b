#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "dto/errors.hpp"
#include "dto/exit_probe.hpp"
#include "scenarios.hpp"
#include "test_support.hpp"

namespace dto {
namespace {

using testing::FnBackend;
using testing::Gen;

// Backend answering probe i correctly in the first hits[i-1] samples.
FnBackend schedule_backend(const Trajectory& t, std::vector<std::size_t> hits, const ExitConfig& cfg) {
  return FnBackend([=](const GenerationRequest& req, std::size_t k) -> std::string {
    auto i = testing::probed_index(req.prompt, t, cfg.exit_pattern);
    if (!i) throw std::runtime_error("unexpected prompt");
    return k < hits[*i - 1] ? "42}." : "41}.";
  });
}

// Sequential reference: first i whose hits/M reaches T, compared exactly as
// hits * den >= num * M for T = num/den.
std::pair<std::size_t, bool> reference_scan(const std::vector<std::size_t>& hits, std::size_t M,
                                            std::size_t num, std::size_t den) {
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i] * den >= num * M) return {i + 1, true};
  }
  return {hits.size(), false};
}

TEST(ExitProbe, BuildPartialAppendsPattern) {
  Trajectory t = testing::numbered_trajectory(3);
  EXPECT_EQ(build_partial(t, 2, "X"), "First, case 1 holds.\n\nWait, case 2 holds.\n\nX");
  EXPECT_THROW(build_partial(t, 0, "X"), IndexOutOfRange);
  EXPECT_THROW(build_partial(t, 4, "X"), IndexOutOfRange);
}

TEST(ExitProbe, ProbeRequestShape) {
  Trajectory t = testing::numbered_trajectory(2);
  ExitConfig cfg;
  FnBackend b = schedule_backend(t, {7, 10}, cfg);
  ProbeContext ctx{"PROMPT:", 5};
  auto probe = probe_index(ctx, t, 1, cfg, testing::answer_problem(), b);
  EXPECT_EQ(probe.hits, 7u);
  EXPECT_EQ(probe.samples, 10u);
  EXPECT_DOUBLE_EQ(probe.p(), 0.7);
  auto reqs = b.requests();
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0].params.n, 10);
  EXPECT_EQ(reqs[0].params.max_tokens, 1 + 16);  // one word answer plus margin
  EXPECT_EQ(reqs[0].prompt, "PROMPT:" + build_partial(t, 1, cfg.exit_pattern));
}

TEST(ExitProbe, EarliestQualifyingIndex) {
  Trajectory t = testing::numbered_trajectory(5);
  ExitConfig cfg;
  FnBackend b = schedule_backend(t, {3, 10, 9, 10, 10}, cfg);
  auto d = find_truncation({}, t, cfg, testing::answer_problem(), b);
  EXPECT_EQ(d.i_prime, 2u);
  EXPECT_TRUE(d.qualified);
  EXPECT_EQ(d.probes.size(), 2u);
  EXPECT_EQ(b.requests().size(), 2u);  // stops at the first hit
}

TEST(ExitProbe, NoQualifyingIndexKeepsEverything) {
  Trajectory t = testing::numbered_trajectory(4);
  ExitConfig cfg;
  FnBackend b = schedule_backend(t, {0, 9, 5, 9}, cfg);
  auto d = find_truncation({}, t, cfg, testing::answer_problem(), b);
  EXPECT_EQ(d.i_prime, 4u);
  EXPECT_FALSE(d.qualified);
  EXPECT_EQ(d.max_p_fraction(), (std::pair<std::size_t, std::size_t>{9, 10}));
  EXPECT_DOUBLE_EQ(d.max_p(), 0.9);
}

TEST(ExitProbe, ScanCanStartLater) {
  Trajectory t = testing::numbered_trajectory(4);
  ExitConfig cfg;
  FnBackend b = schedule_backend(t, {10, 10, 0, 10}, cfg);
  auto d = find_truncation({}, t, cfg, testing::answer_problem(), b, 3);
  EXPECT_EQ(d.i_prime, 4u);
  EXPECT_EQ(d.probes.front().index, 3u);
  EXPECT_THROW(find_truncation({}, t, cfg, testing::answer_problem(), b, 5), IndexOutOfRange);
}

TEST(ExitProbe, ThresholdBoundaryIsInclusive) {
  Trajectory t = testing::numbered_trajectory(2);
  ExitConfig cfg;
  cfg.threshold = 0.8;
  FnBackend b = schedule_backend(t, {8, 10}, cfg);
  EXPECT_EQ(find_truncation({}, t, cfg, testing::answer_problem(), b).i_prime, 1u);
}

TEST(ExitProbe, MaskAndTruncate) {
  Trajectory t = testing::numbered_trajectory(4);
  EXPECT_EQ(selection_mask(4, 2), (std::vector<bool>{true, true, false, false}));
  TruncationDecision d;
  d.i_prime = 3;
  EXPECT_EQ(truncate(t, d).size(), 3u);
  EXPECT_EQ(truncate(t, d).think_text(), t.prefix_text(3));
}

TEST(ExitProbe, ConfigValidation) {
  ExitConfig cfg;
  cfg.samples = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.threshold = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.threshold = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ExitProbe, AuditRecord) {
  ProbeResult p{3, 7, 10, {}};
  auto j = probe_audit_record("p1", 2, p, 1.0);
  EXPECT_EQ(j["index"], 3);
  EXPECT_EQ(j["hits"], 7);
  EXPECT_EQ(j["M"], 10);
  EXPECT_EQ(j["qualified"], false);
  EXPECT_DOUBLE_EQ(j["p"].get<double>(), 0.7);
}

// Random schedules against the sequential reference, for several windows
// and random per-call latency so concurrent probes finish out of order.
TEST(ExitProbe, WindowedScanMatchesSequentialReference) {
  Gen g(20240611);
  const std::vector<std::pair<std::size_t, std::size_t>> thresholds{{1, 2}, {4, 5}, {1, 1}};
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t n = g.between(1, 9);
    const std::size_t M = g.between(1, 10);
    std::vector<std::size_t> hits(n);
    for (auto& h : hits) h = g.coin(0.3) ? M : g.below(M + 1);
    const auto [num, den] = g.pick(thresholds);
    Trajectory t = testing::numbered_trajectory(n);
    ExitConfig cfg;
    cfg.samples = static_cast<int>(M);
    cfg.threshold = static_cast<double>(num) / static_cast<double>(den);
    cfg.window = static_cast<int>(g.between(1, 4));
    const unsigned jitter_seed = static_cast<unsigned>(g.below(1000));
    FnBackend b([&, jitter_seed](const GenerationRequest& req, std::size_t k) -> std::string {
      auto i = testing::probed_index(req.prompt, t, cfg.exit_pattern);
      if (k == 0) std::this_thread::sleep_for(std::chrono::microseconds((jitter_seed * (*i) * 37) % 400));
      return k < hits[*i - 1] ? "42}." : "41}.";
    });
    auto d = find_truncation({}, t, cfg, testing::answer_problem(), b);
    auto [want_i, want_q] = reference_scan(hits, M, num, den);
    ASSERT_EQ(d.i_prime, want_i) << "trial " << trial;
    ASSERT_EQ(d.qualified, want_q) << "trial " << trial;
    for (std::size_t k = 1; k < d.probes.size(); ++k) ASSERT_LT(d.probes[k - 1].index, d.probes[k].index);
  }
}

}  // namespace
}  // namespace dto
