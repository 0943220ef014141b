#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dto/types.hpp"

namespace dto {

enum class CostUnit { tokens, attn_flops };

/// Relative causal-attention cost of generating L tokens: L(L+1)/2.
double attn_flops(std::size_t length_tokens) noexcept;

/// Per-segment costs c(δ) and their sum C(Δ). Under attn_flops a segment is
/// charged the attention cost it adds on top of the segments before it, so
/// the total equals attn_flops of the whole trajectory.
class CostModel {
 public:
  explicit CostModel(CostUnit unit = CostUnit::tokens) : unit_(unit) {}

  CostUnit unit() const noexcept { return unit_; }
  std::vector<double> segment_costs(std::span<const std::size_t> segment_tokens) const;
  double total(std::span<const std::size_t> segment_tokens) const;

 private:
  CostUnit unit_;
};

/// (acc_method / acc_base) · (cost_base / cost_method). Throws DivisionDomain
/// when acc_base or cost_method is not positive.
double efficiency_eta(double acc_method, double acc_base, double cost_method, double cost_base);

struct EvaluationConfig {
  AnswerMatchPolicy match_policy{MatchMode::boxed_equality};
  std::optional<double> alpha;  // defaults to the measured baseline accuracy
  std::string cue = "Wait";
};

struct ResponseRecord {
  std::string problem_id;
  std::string text;
  std::size_t tokens = 0;
};

struct ResponseStats {
  std::size_t count = 0;
  double accuracy = 0.0;  // fraction in [0, 1]
  double mean_tokens = 0.0;
  double mean_attn_flops = 0.0;
  double mean_cue_count = 0.0;
};

/// Buckets [0,0.1), …, [0.9,1.0) and exactly 1.0, filled from exact
/// (hits, samples) fractions.
struct MaxPHistogram {
  std::array<std::size_t, 11> buckets{};

  void add(std::size_t hits, std::size_t samples);
  static std::string label(std::size_t bucket);
};

struct EfficiencyReport {
  std::string dataset;
  std::string method = "DTO";
  ResponseStats base;
  ResponseStats optimized;
  std::optional<double> eta;
  std::optional<double> attn_flops_ratio;  // optimized / base
  double alpha = 0.0;
  bool alpha_satisfied = false;
  MaxPHistogram max_p_histogram;
};

/// Aggregates responses aligned one-to-one with `problems`. Throws
/// AlignmentError on a length or id mismatch.
ResponseStats summarize(const std::vector<Problem>& problems, const std::vector<ResponseRecord>& responses,
                        const EvaluationConfig& cfg);

/// Compares base and method responses over the same problems. `max_p`
/// holds (hits, samples) per originally incorrect response.
EfficiencyReport evaluate(std::string dataset, const std::vector<Problem>& problems,
                          const std::vector<ResponseRecord>& base, const std::vector<ResponseRecord>& method,
                          const std::vector<std::pair<std::size_t, std::size_t>>& max_p,
                          const EvaluationConfig& cfg);

struct MethodRow {
  std::string method;
  double accuracy = 0.0;
  double tokens = 0.0;
  std::optional<double> eff;
};

/// Fills `eff` for every row relative to the row named `baseline`.
std::vector<MethodRow> with_efficiency(std::vector<MethodRow> rows, std::string_view baseline);

/// Method | Acc. | #Tokens | Eff. as fixed-width plain text.
std::string render_table(std::string_view title, const std::vector<MethodRow>& rows);

/// Table plus the cost, cue and histogram lines of a report.
std::string render_report(const EfficiencyReport& report);

nlohmann::json to_json(const EfficiencyReport& report);

}  // namespace dto
