#include <gtest/gtest.h>

#include <cmath>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "dto/errors.hpp"
#include "dto/simpo.hpp"
#include "test_support.hpp"

namespace dto {
namespace {

using Big = boost::multiprecision::cpp_dec_float_50;

// -ln sigmoid(m) in 50 digits.
double oracle_loss(double margin) {
  const Big m(margin);
  return static_cast<double>(boost::multiprecision::log1p(boost::multiprecision::exp(-m)));
}

TEST(Simpo, KnownValues) {
  SimpoConfig cfg{1.0, 0.0};
  EXPECT_NEAR(simpo_loss(2.0, 0.0, cfg).loss, 0.1269280110429725, 1e-12);
  EXPECT_NEAR(simpo_loss(0.0, 0.0, cfg).loss, std::log(2.0), 1e-15);
}

TEST(Simpo, MarginUsesBetaAndAbsoluteGamma) {
  SimpoConfig cfg;  // beta 10, gamma 3
  auto t = simpo_loss(-0.5, -0.9, cfg);
  EXPECT_NEAR(t.margin, 10.0 * 0.4 - 3.0, 1e-12);
  EXPECT_NEAR(t.loss, oracle_loss(t.margin), 1e-12);
}

TEST(Simpo, MatchesExtendedPrecisionOverRange) {
  testing::Gen g(5);
  for (int i = 0; i < 2000; ++i) {
    const double m = g.real(-60.0, 60.0);
    const double got = softplus(-m);
    const double want = oracle_loss(m);
    ASSERT_LE(std::abs(got - want), 1e-12 * std::max(1.0, std::abs(want))) << "m=" << m;
  }
}

TEST(Simpo, SoftplusIdentity) {
  for (double m : {0.1, 1.0, 10.0, 50.0}) EXPECT_NEAR(softplus(m) - softplus(-m), m, 1e-12);
}

TEST(Simpo, SoftplusDoesNotOverflow) {
  EXPECT_DOUBLE_EQ(softplus(1000.0), 1000.0);
  EXPECT_EQ(softplus(-1000.0), 0.0);
  EXPECT_TRUE(std::isfinite(softplus(700.0)));
}

TEST(Simpo, GradientMatchesFiniteDifference) {
  SimpoConfig cfg;
  for (double w : {-0.2, -1.0, -0.31}) {
    const double l = -0.6;
    const double h = 1e-6;
    const double fd = (simpo_loss(w + h, l, cfg).loss - simpo_loss(w - h, l, cfg).loss) / (2 * h);
    const double m = simpo_loss(w, l, cfg).margin;
    const double analytic = -cfg.beta / (1.0 + std::exp(m));  // -beta * sigmoid(-m)
    EXPECT_NEAR(fd, analytic, 1e-6);
  }
}

TEST(Simpo, AverageLogprob) {
  std::vector<double> v{-1.0, -2.0, -3.0};
  EXPECT_DOUBLE_EQ(average_logprob(v), -2.0);
  EXPECT_THROW(average_logprob(std::vector<double>{}), EmptySequence);
  std::vector<double> many(1001, 0.1);
  EXPECT_NEAR(pairwise_sum(many), 100.1, 1e-12);
}

TEST(Simpo, ScoresDataset) {
  std::vector<PreferencePair> pairs{{"a", "P", "x y", "x y z w", 2, 4, PairSource::from_correct},
                                    {"a", "P", "y", "z", 1, 1, PairSource::from_correct},
                                    {"b", "P", "x", "x", 1, 1, PairSource::from_incorrect}};
  auto source = [](std::string_view, std::string_view r) {
    return r.size() < 3 ? std::vector<double>{-0.1} : std::vector<double>{-0.5, -0.7};
  };
  auto out = score_dataset(pairs, source, SimpoConfig{});
  ASSERT_EQ(out.scored.size(), 3u);
  EXPECT_EQ(out.scored[0].pair_id, "a/0");
  EXPECT_EQ(out.scored[1].pair_id, "a/1");
  EXPECT_EQ(out.scored[2].pair_id, "b/0");
  EXPECT_NEAR(out.scored[0].margin, 10.0 * (-0.6 - -0.6) - 3.0, 1e-12);
  EXPECT_FALSE(out.scored[0].preferred_ok);
  EXPECT_DOUBLE_EQ(out.summary.mean_loss, (out.scored[0].loss + out.scored[1].loss + out.scored[2].loss) / 3);
  EXPECT_THROW(score_dataset({}, source, SimpoConfig{}), EmptySequence);
  EXPECT_THROW(score_dataset(pairs, source, SimpoConfig{0.0, 1.0}), ConfigError);
}

}  // namespace
}  // namespace dto
