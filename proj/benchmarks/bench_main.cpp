#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "dto/answer.hpp"
#include "dto/exit_probe.hpp"
#include "dto/mock_backend.hpp"
#include "dto/segmenter.hpp"
#include "dto/simpo.hpp"

namespace {

std::string long_trace(std::size_t paragraphs) {
  static const char* cues[] = {"Wait", "Alternatively", "Hmm", "So"};
  std::string out;
  for (std::size_t i = 0; i < paragraphs; ++i) {
    if (i > 0) out += "\n\n";
    out += cues[i % 4];
    out += ", let me reconsider step " + std::to_string(i) + " of the computation carefully.";
  }
  return out;
}

void BM_Segment(benchmark::State& state) {
  const std::string text = long_trace(static_cast<std::size_t>(state.range(0)));
  const auto lex = dto::CueLexicon::defaults();
  for (auto _ : state) benchmark::DoNotOptimize(dto::segment(text, lex));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Segment)->Arg(16)->Arg(256)->Arg(4096);

void BM_FindTruncationMock(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const dto::Trajectory t = dto::segment(long_trace(n), dto::CueLexicon::defaults());
  dto::ExitConfig cfg;
  // Only the last prefix answers correctly, so every index is probed.
  std::vector<dto::FixtureRule> rules{{t.prefix_text(n) + cfg.exit_pattern, dto::MatchKind::suffix, {"42}"}},
                                      {cfg.exit_pattern, dto::MatchKind::suffix, {"41}"}}};
  const dto::ScriptedFixture fixture(rules);
  const dto::Problem problem{"b", "q", "42", {}};
  for (auto _ : state) {
    dto::MockBackend mock(fixture);
    benchmark::DoNotOptimize(dto::find_truncation({"x", 1}, t, cfg, problem, mock));
  }
}
BENCHMARK(BM_FindTruncationMock)->Arg(8)->Arg(64);

void BM_SimpoLoss(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d(-0.5, 0.2);
  std::vector<double> lw(state.range(0)), ll(state.range(0));
  for (auto& v : lw) v = d(rng);
  for (auto& v : ll) v = d(rng);
  const dto::SimpoConfig cfg;
  for (auto _ : state) {
    double sum = 0;
    for (std::size_t i = 0; i < lw.size(); ++i) sum += dto::simpo_loss(lw[i], ll[i], cfg).loss;
    benchmark::DoNotOptimize(sum);
  }
}
BENCHMARK(BM_SimpoLoss)->Arg(1024);

void BM_ExtractBoxed(benchmark::State& state) {
  std::string text = long_trace(static_cast<std::size_t>(state.range(0)));
  text += " so the answer is \\boxed{\\frac{5}{2}}.";
  for (auto _ : state) benchmark::DoNotOptimize(dto::extract_boxed(text));
}
BENCHMARK(BM_ExtractBoxed)->Arg(64)->Arg(1024);

}  // namespace
BENCHMARK_MAIN();
