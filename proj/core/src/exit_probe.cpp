#include "dto/exit_probe.hpp"

#include <algorithm>
#include <future>

#include "dto/answer.hpp"
#include "dto/errors.hpp"
#include "dto/hash.hpp"

namespace dto {

void ExitConfig::validate() const {
  if (samples < 1) throw ConfigError("exit.samples (M) must be >= 1");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("exit.threshold (T) must be in (0, 1]");
  if (answer_margin_tokens < 1) throw ConfigError("exit.answer_margin_tokens must be >= 1");
  if (window < 1) throw ConfigError("exit.window must be >= 1");
  if (exit_pattern.empty()) throw ConfigError("exit.exit_pattern must not be empty");
}

std::pair<std::size_t, std::size_t> TruncationDecision::max_p_fraction() const {
  std::pair<std::size_t, std::size_t> best{0, 1};
  for (const auto& p : probes) {
    // a/b > c/d  <=>  a*d > c*b
    if (p.hits * best.second > best.first * p.samples) best = {p.hits, p.samples};
  }
  return best;
}

double TruncationDecision::max_p() const {
  auto [h, m] = max_p_fraction();
  return static_cast<double>(h) / static_cast<double>(m);
}

std::string build_partial(const Trajectory& trajectory, std::size_t i, std::string_view exit_pattern) {
  if (i == 0 || i > trajectory.size()) {
    throw IndexOutOfRange("probe index " + std::to_string(i) + " outside 1.." +
                          std::to_string(trajectory.size()));
  }
  std::string out = trajectory.prefix_text(i);
  out += exit_pattern;
  return out;
}

ProbeResult probe_index(const ProbeContext& ctx, const Trajectory& trajectory, std::size_t i,
                        const ExitConfig& cfg, const Problem& problem, Backend& backend) {
  GenerationRequest req;
  req.prompt = ctx.prompt_prefix + build_partial(trajectory, i, cfg.exit_pattern);
  req.params = cfg.sampling;
  req.params.n = cfg.samples;
  req.params.max_tokens =
      static_cast<int>(backend.count_tokens(problem.ground_truth)) + cfg.answer_margin_tokens;
  const std::uint64_t seed =
      mix_seed({ctx.seed, fnv1a64(problem.id), fnv1a64(trajectory.think_text()), i});
  req.params.seed = seed;
  req.correlation_id = seed;

  GenerationResult result = sample(backend, std::move(req), cfg.strategy);
  if (result.completions.size() != static_cast<std::size_t>(cfg.samples)) {
    throw BackendError("probe expected " + std::to_string(cfg.samples) + " completions, got " +
                       std::to_string(result.completions.size()));
  }
  ProbeResult probe;
  probe.index = i;
  probe.samples = result.completions.size();
  for (const auto& c : result.completions) {
    if (answer_matches(c.text, problem.ground_truth, cfg.match_policy)) ++probe.hits;
  }
  probe.completions = std::move(result.completions);
  return probe;
}

TruncationDecision find_truncation(const ProbeContext& ctx, const Trajectory& trajectory,
                                   const ExitConfig& cfg, const Problem& problem, Backend& backend,
                                   std::size_t first) {
  cfg.validate();
  const std::size_t n = trajectory.size();
  if (first == 0 || first > n) {
    throw IndexOutOfRange("scan start " + std::to_string(first) + " outside 1.." + std::to_string(n));
  }
  TruncationDecision decision;
  decision.i_prime = n;
  const auto window = static_cast<std::size_t>(cfg.window);

  for (std::size_t i = first; i <= n; i += window) {
    const std::size_t last = std::min(n, i + window - 1);
    std::vector<ProbeResult> batch;
    if (last == i) {
      batch.push_back(probe_index(ctx, trajectory, i, cfg, problem, backend));
    } else {
      std::vector<std::future<ProbeResult>> pending;
      for (std::size_t k = i; k <= last; ++k) {
        pending.push_back(std::async(std::launch::async, [&, k] {
          return probe_index(ctx, trajectory, k, cfg, problem, backend);
        }));
      }
      // Collected by index, whatever order they finished in.
      for (auto& f : pending) batch.push_back(f.get());
    }
    for (auto& probe : batch) {
      const bool hit = !decision.qualified && probe.meets(cfg.threshold);
      if (hit) {
        decision.qualified = true;
        decision.i_prime = probe.index;
      }
      decision.probes.push_back(std::move(probe));
    }
    if (decision.qualified) break;
  }
  return decision;
}

Trajectory truncate(const Trajectory& trajectory, const TruncationDecision& decision) {
  return trajectory.prefix(decision.i_prime);
}

std::vector<bool> selection_mask(std::size_t n, std::size_t i_prime) {
  std::vector<bool> mask(n, false);
  for (std::size_t i = 1; i <= n; ++i) mask[i - 1] = i <= i_prime;
  return mask;
}

nlohmann::json probe_audit_record(std::string_view problem_id, std::size_t sample_index,
                                  const ProbeResult& probe, double threshold) {
  return {{"problem_id", problem_id}, {"sample", sample_index},  {"index", probe.index},
          {"p", probe.p()},           {"hits", probe.hits},      {"M", probe.samples},
          {"qualified", probe.meets(threshold)}};
}

}  // namespace dto
