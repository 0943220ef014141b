#include <gtest/gtest.h>

#include <sstream>
#include <thread>

#include "dto/errors.hpp"
#include "dto/mock_backend.hpp"
#include "test_support.hpp"

namespace dto {
namespace {

GenerationRequest req(std::string prompt, int n = 1, int max_tokens = 100) {
  GenerationRequest r;
  r.prompt = std::move(prompt);
  r.params.n = n;
  r.params.max_tokens = max_tokens;
  return r;
}

TEST(MockBackend, CountsWhitespaceWords) {
  MockBackend m(ScriptedFixture{});
  EXPECT_EQ(m.count_tokens("final answer 45"), 3u);
  EXPECT_EQ(m.count_tokens(""), 0u);
  EXPECT_EQ(m.count_tokens("  a\n\tb  "), 2u);
}

TEST(MockBackend, CyclesResponsesPerPrompt) {
  MockBackend m(ScriptedFixture({{"Q", MatchKind::suffix, {"a", "b", "c"}}}));
  auto r = m.generate(req("xQ", 4));
  ASSERT_EQ(r.completions.size(), 4u);
  EXPECT_EQ(r.completions[0].text, "a");
  EXPECT_EQ(r.completions[3].text, "a");
  EXPECT_EQ(m.generate(req("xQ")).completions[0].text, "b");
  // A different prompt hitting the same rule has its own cursor.
  EXPECT_EQ(m.generate(req("yQ")).completions[0].text, "a");
  EXPECT_EQ(m.calls(), 3u);
}

TEST(MockBackend, FirstMatchingRuleWins) {
  MockBackend m(ScriptedFixture({{"specific Q", MatchKind::suffix, {"one"}}, {"Q", MatchKind::suffix, {"two"}}}));
  EXPECT_EQ(m.generate(req("a specific Q")).completions[0].text, "one");
  EXPECT_EQ(m.generate(req("other Q")).completions[0].text, "two");
}

TEST(MockBackend, MissThrows) {
  MockBackend m(ScriptedFixture({{"Q", MatchKind::exact, {"x"}}}));
  EXPECT_THROW(m.generate(req("not Q")), FixtureMiss);
}

TEST(MockBackend, MatchKinds) {
  FixtureRule contains{"mid", MatchKind::contains, {"x"}};
  FixtureRule prefix{"pre", MatchKind::prefix, {"x"}};
  FixtureRule glob{"a*c\\*", MatchKind::glob, {"x"}};
  EXPECT_TRUE(contains.matches("amidst"));
  EXPECT_TRUE(prefix.matches("prefix"));
  EXPECT_FALSE(prefix.matches("a prefix"));
  EXPECT_TRUE(glob.matches("abbbc*"));
  EXPECT_TRUE(glob.matches("ac*"));
  EXPECT_FALSE(glob.matches("abc"));
  EXPECT_FALSE(glob.matches("abc*d"));
}

TEST(MockBackend, TruncatesAtMaxTokensAndStops) {
  MockBackend m(ScriptedFixture({{"Q", MatchKind::suffix, {"one two three four END five"}}}));
  auto cut = m.generate(req("Q", 1, 2)).completions[0];
  EXPECT_EQ(cut.text, "one two");
  EXPECT_EQ(cut.finish_reason, FinishReason::length);
  EXPECT_EQ(cut.tokens, 2u);

  auto r = req("Q", 1, 100);
  r.stop = {"END"};
  auto stopped = m.generate(r).completions[0];
  EXPECT_EQ(stopped.text, "one two three four ");
  EXPECT_EQ(stopped.finish_reason, FinishReason::stop);
}

TEST(MockBackend, UsageMatchesCountTokens) {
  MockBackend m(ScriptedFixture({{"Q", MatchKind::suffix, {"a b", "c d e", "", "f\ng"}}}));
  auto r = m.generate(req("Q", 4));
  for (std::size_t k = 0; k < r.completions.size(); ++k) {
    EXPECT_EQ(r.usage.completion_tokens[k], m.count_tokens(r.completions[k].text));
    EXPECT_EQ(r.completions[k].tokens, m.count_tokens(r.completions[k].text));
  }
}

TEST(MockBackend, LogprobsSumToSequenceLogprob) {
  MockBackend m(ScriptedFixture({{"Q", MatchKind::suffix, {"alpha beta gamma"}}}));
  auto r = req("Q");
  r.logprobs = true;
  auto c = m.generate(r).completions[0];
  ASSERT_TRUE(c.token_logprobs);
  double sum = 0;
  for (const auto& t : *c.token_logprobs) sum += t.logprob;
  EXPECT_DOUBLE_EQ(*c.sequence_logprob(), sum);
  auto scored = m.score("Q", "alpha beta gamma");
  ASSERT_EQ(scored.size(), 3u);
  EXPECT_DOUBLE_EQ(scored[1].logprob, MockBackend::word_logprob("beta"));
}

TEST(MockBackend, DeterministicUnderInterleaving) {
  ScriptedFixture f({{"A", MatchKind::suffix, {"a1", "a2", "a3"}}, {"B", MatchKind::suffix, {"b1", "b2"}}});
  MockBackend serial(f);
  std::vector<std::string> a_serial, b_serial;
  for (int i = 0; i < 6; ++i) a_serial.push_back(serial.generate(req("A")).completions[0].text);
  for (int i = 0; i < 6; ++i) b_serial.push_back(serial.generate(req("B")).completions[0].text);

  MockBackend threaded(f, MockOptions{std::chrono::microseconds(300), 5});
  std::vector<std::string> a_par, b_par;
  std::thread ta([&] {
    for (int i = 0; i < 6; ++i) a_par.push_back(threaded.generate(req("A")).completions[0].text);
  });
  std::thread tb([&] {
    for (int i = 0; i < 6; ++i) b_par.push_back(threaded.generate(req("B")).completions[0].text);
  });
  ta.join();
  tb.join();
  EXPECT_EQ(a_par, a_serial);
  EXPECT_EQ(b_par, b_serial);
}

TEST(ScriptedFixture, ParsesJsonl) {
  std::istringstream in(
      "# comment\n"
      "\n"
      "{\"match\": \"Q\", \"responses\": [\"x\"], \"mode\": \"cycle\"}\n"
      "{\"match\": \"R*\", \"kind\": \"glob\", \"responses\": [\"y\", \"z\"]}\n");
  auto f = ScriptedFixture::parse(in);
  ASSERT_EQ(f.rules().size(), 2u);
  EXPECT_EQ(f.rules()[0].kind, MatchKind::contains);
  EXPECT_EQ(f.rules()[1].kind, MatchKind::glob);
  EXPECT_EQ(f.find("Rabbit"), 1u);
}

TEST(ScriptedFixture, RejectsBadLines) {
  std::istringstream bad_json("{nope}\n");
  EXPECT_THROW(ScriptedFixture::parse(bad_json), ConfigError);
  std::istringstream bad_mode("{\"match\": \"Q\", \"responses\": [\"x\"], \"mode\": \"random\"}\n");
  EXPECT_THROW(ScriptedFixture::parse(bad_mode), ConfigError);
  std::istringstream no_responses("{\"match\": \"Q\", \"responses\": []}\n");
  EXPECT_THROW(ScriptedFixture::parse(no_responses), ConfigError);
  std::istringstream bad_kind("{\"match\": \"Q\", \"kind\": \"regex\", \"responses\": [\"x\"]}\n");
  EXPECT_THROW(ScriptedFixture::parse(bad_kind), ConfigError);
}

TEST(SampleStrategy, PerSampleMakesOneRequestPerCompletion) {
  MockBackend m(ScriptedFixture({{"Q", MatchKind::suffix, {"a", "b", "c"}}}));
  auto r = req("Q", 3);
  r.params.seed = 9;
  auto out = sample(m, r, SampleStrategy::per_sample);
  ASSERT_EQ(out.completions.size(), 3u);
  EXPECT_EQ(out.completions[0].text, "a");
  EXPECT_EQ(out.completions[2].text, "c");
  EXPECT_EQ(m.calls(), 3u);
  EXPECT_EQ(out.usage.completion_tokens.size(), 3u);
}

}  // namespace
}  // namespace dto
