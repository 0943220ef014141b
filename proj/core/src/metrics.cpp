#include "dto/metrics.hpp"

#include <cstdio>

#include "dto/answer.hpp"
#include "dto/errors.hpp"
#include "dto/segmenter.hpp"

namespace dto {
namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

double attn_flops(std::size_t length_tokens) noexcept {
  const auto l = static_cast<double>(length_tokens);
  return l * (l + 1.0) / 2.0;
}

std::vector<double> CostModel::segment_costs(std::span<const std::size_t> segment_tokens) const {
  std::vector<double> costs;
  costs.reserve(segment_tokens.size());
  std::size_t before = 0;
  for (std::size_t t : segment_tokens) {
    if (unit_ == CostUnit::tokens) {
      costs.push_back(static_cast<double>(t));
    } else {
      costs.push_back(attn_flops(before + t) - attn_flops(before));
    }
    before += t;
  }
  return costs;
}

double CostModel::total(std::span<const std::size_t> segment_tokens) const {
  double sum = 0.0;
  for (double c : segment_costs(segment_tokens)) sum += c;
  return sum;
}

double efficiency_eta(double acc_method, double acc_base, double cost_method, double cost_base) {
  if (!(acc_base > 0.0)) throw DivisionDomain("baseline accuracy must be > 0");
  if (!(cost_method > 0.0)) throw DivisionDomain("method cost must be > 0");
  if (!(cost_base > 0.0)) throw DivisionDomain("baseline cost must be > 0");
  return (acc_method / acc_base) * (cost_base / cost_method);
}

void MaxPHistogram::add(std::size_t hits, std::size_t samples) {
  if (samples == 0 || hits > samples) throw InvalidArgument("max_p needs 0 <= hits <= samples, samples > 0");
  buckets[hits == samples ? 10 : (hits * 10) / samples] += 1;
}

std::string MaxPHistogram::label(std::size_t bucket) {
  if (bucket >= 10) return "[1.0]";
  return "[" + fmt("%.1f", bucket / 10.0) + "," + fmt("%.1f", (bucket + 1) / 10.0) + ")";
}

ResponseStats summarize(const std::vector<Problem>& problems, const std::vector<ResponseRecord>& responses,
                        const EvaluationConfig& cfg) {
  if (problems.size() != responses.size()) {
    throw AlignmentError(std::to_string(responses.size()) + " responses for " +
                         std::to_string(problems.size()) + " problems");
  }
  ResponseStats s;
  s.count = responses.size();
  if (s.count == 0) return s;
  double correct = 0.0;
  double tokens = 0.0;
  double flops = 0.0;
  double cues = 0.0;
  for (std::size_t k = 0; k < responses.size(); ++k) {
    if (responses[k].problem_id != problems[k].id) {
      throw AlignmentError("response " + std::to_string(k) + " is for '" + responses[k].problem_id +
                           "', expected '" + problems[k].id + "'");
    }
    if (answer_matches(responses[k].text, problems[k].ground_truth, cfg.match_policy)) correct += 1.0;
    tokens += static_cast<double>(responses[k].tokens);
    flops += attn_flops(responses[k].tokens);
    cues += static_cast<double>(count_cue(responses[k].text, cfg.cue));
  }
  const auto n = static_cast<double>(s.count);
  s.accuracy = correct / n;
  s.mean_tokens = tokens / n;
  s.mean_attn_flops = flops / n;
  s.mean_cue_count = cues / n;
  return s;
}

EfficiencyReport evaluate(std::string dataset, const std::vector<Problem>& problems,
                          const std::vector<ResponseRecord>& base, const std::vector<ResponseRecord>& method,
                          const std::vector<std::pair<std::size_t, std::size_t>>& max_p,
                          const EvaluationConfig& cfg) {
  EfficiencyReport r;
  r.dataset = std::move(dataset);
  r.base = summarize(problems, base, cfg);
  r.optimized = summarize(problems, method, cfg);
  if (r.base.accuracy > 0.0 && r.optimized.mean_tokens > 0.0 && r.base.mean_tokens > 0.0) {
    r.eta = efficiency_eta(r.optimized.accuracy, r.base.accuracy, r.optimized.mean_tokens, r.base.mean_tokens);
  }
  if (r.base.mean_attn_flops > 0.0) r.attn_flops_ratio = r.optimized.mean_attn_flops / r.base.mean_attn_flops;
  r.alpha = cfg.alpha.value_or(r.base.accuracy);
  r.alpha_satisfied = r.optimized.accuracy >= r.alpha;
  for (auto [hits, samples] : max_p) r.max_p_histogram.add(hits, samples);
  return r;
}

std::vector<MethodRow> with_efficiency(std::vector<MethodRow> rows, std::string_view baseline) {
  const MethodRow* base = nullptr;
  for (const auto& r : rows) {
    if (r.method == baseline) base = &r;
  }
  if (base == nullptr) throw InvalidArgument("no baseline row named '" + std::string(baseline) + "'");
  const double acc = base->accuracy;
  const double tokens = base->tokens;
  for (auto& r : rows) r.eff = efficiency_eta(r.accuracy, acc, r.tokens, tokens);
  return rows;
}

std::string render_table(std::string_view title, const std::vector<MethodRow>& rows) {
  std::string out;
  if (!title.empty()) out += std::string(title) + "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-16s | %8s | %10s | %6s\n", "Method", "Acc.", "#Tokens", "Eff.");
  out += line;
  out += std::string(16, '-') + "-+-" + std::string(8, '-') + "-+-" + std::string(10, '-') + "-+-" +
         std::string(6, '-') + "\n";
  for (const auto& r : rows) {
    const std::string eff = r.eff ? fmt("%.3f", *r.eff) : "N/A";
    std::snprintf(line, sizeof line, "%-16s | %8.2f | %10.2f | %6s\n", r.method.c_str(), r.accuracy,
                  r.tokens, eff.c_str());
    out += line;
  }
  return out;
}

std::string render_report(const EfficiencyReport& report) {
  std::vector<MethodRow> rows = {
      {"Baseline", report.base.accuracy * 100.0, report.base.mean_tokens, std::nullopt},
      {report.method, report.optimized.accuracy * 100.0, report.optimized.mean_tokens, report.eta}};
  if (report.eta) rows[0].eff = 1.0;
  std::string out = render_table(report.dataset, rows);
  out += "responses: " + std::to_string(report.base.count) + "\n";
  out += "attention FLOPs ratio: " +
         (report.attn_flops_ratio ? fmt("%.4f", *report.attn_flops_ratio) : std::string("N/A")) + "\n";
  out += "mean cue count: base " + fmt("%.3f", report.base.mean_cue_count) + ", " + report.method + " " +
         fmt("%.3f", report.optimized.mean_cue_count) + "\n";
  out += "alpha " + fmt("%.4f", report.alpha) + (report.alpha_satisfied ? " satisfied" : " NOT satisfied") + "\n";
  out += "max p histogram (originally incorrect):";
  for (std::size_t b = 0; b < report.max_p_histogram.buckets.size(); ++b) {
    if (report.max_p_histogram.buckets[b] == 0) continue;
    out += " " + MaxPHistogram::label(b) + ":" + std::to_string(report.max_p_histogram.buckets[b]);
  }
  out += "\n";
  return out;
}

nlohmann::json to_json(const EfficiencyReport& r) {
  auto stats = [](const ResponseStats& s) {
    return nlohmann::json{{"count", s.count},
                          {"accuracy", s.accuracy},
                          {"mean_tokens", s.mean_tokens},
                          {"mean_attn_flops", s.mean_attn_flops},
                          {"mean_cue_count", s.mean_cue_count}};
  };
  nlohmann::json hist = nlohmann::json::object();
  for (std::size_t b = 0; b < r.max_p_histogram.buckets.size(); ++b) {
    hist[MaxPHistogram::label(b)] = r.max_p_histogram.buckets[b];
  }
  return {{"dataset", r.dataset},
          {"method", r.method},
          {"base", stats(r.base)},
          {"optimized", stats(r.optimized)},
          {"eta", r.eta ? nlohmann::json(*r.eta) : nlohmann::json(nullptr)},
          {"attn_flops_ratio", r.attn_flops_ratio ? nlohmann::json(*r.attn_flops_ratio) : nlohmann::json(nullptr)},
          {"alpha", r.alpha},
          {"alpha_satisfied", r.alpha_satisfied},
          {"max_p_histogram", hist}};
}

}  // namespace dto
