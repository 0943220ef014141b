#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dto/backend.hpp"
#include "dto/exit_probe.hpp"
#include "dto/finalizer.hpp"
#include "dto/types.hpp"

namespace dto {

/// Judge instructions with {problem}, {ground_truth_answer} and
/// {thinking_patterns} placeholders; `{{`/`}}` render as literal braces.
extern const std::string_view kDefaultJudgeTemplate;

enum class Verdict { keep, remove };

std::string_view to_string(Verdict v) noexcept;

struct JudgeVerdicts {
  std::vector<Verdict> per_chunk;  // per_chunk[i-1] is the verdict for chunk i
  std::string raw_response;
};

struct PruneConfig {
  int margin_tokens = 16;
  bool validate_each = true;
  bool protect_first_segment = false;
  bool parallel_validations = false;
  SamplingParams judge_params{0.0, 1.0, 4096, 1, std::nullopt};
  SamplingParams validation_params{0.0, 1.0, 1, 1, std::nullopt};  // max_tokens set per call
  std::string judge_template{kDefaultJudgeTemplate};

  void validate() const;
};

struct PruneAuditEntry {
  std::size_t chunk = 0;
  Verdict verdict = Verdict::keep;
  bool is_protected = false;
  std::optional<bool> validated;  // leave-one-out decode result, when one ran
  bool rolled_back = false;       // re-added after the joint check failed
  bool removed = false;
};

/// Final trajectory: kept segments ⊕ separator ⊕ finalize pattern ⊕ closer.
struct OptimizedTrajectory {
  std::string problem_id;
  std::size_t sample_index = 0;
  std::string text;
  std::vector<std::size_t> kept_indices;
  std::vector<std::size_t> removed_indices;
  std::size_t i_prime = 0;
  bool qualified = false;
  std::size_t source_segments = 0;
  std::size_t token_count = 0;
  std::size_t source_tokens = 0;
  bool source_correct = false;
  std::pair<std::size_t, std::size_t> max_p{0, 1};  // hits, samples

  // Provenance.
  std::vector<std::size_t> finalize_attempts;  // i' values tried, in order
  std::size_t closer_tokens = 0;
  std::string judge_raw;
  std::optional<std::string> judge_error;
  std::vector<PruneAuditEntry> prune_audit;
  std::optional<bool> final_check;
};

/// Formats `{name}` placeholders from `values`. Throws ConfigError for a
/// placeholder with no value.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// "[Chunk i]\n<segment>" blocks separated by blank lines.
std::string format_chunks(const Trajectory& segments);

/// Judge prompt over the kept segments; the finalize pattern and closer are
/// not offered as chunks.
std::string render_judge_prompt(const Problem& problem, const FinalizedTrajectory& finalized,
                                std::string_view judge_template = kDefaultJudgeTemplate);

/// One verdict per chunk 1..expected_n from "[Chunk i] KEEP AS IS|REMOVE"
/// lines, any order, later lines overriding earlier ones. Throws
/// JudgeParseError on missing, malformed or out-of-range entries.
JudgeVerdicts parse_verdicts(std::string_view judge_response, std::size_t expected_n);

/// Text decoded from during validation: kept segments minus `removed`, then
/// the tail up to (not including) the closer's first `\boxed`, or the whole
/// closer when it has none.
std::string validation_text(const FinalizedTrajectory& finalized, const std::set<std::size_t>& removed);

/// Quick decode from validation_text(finalized, {i}); true when the
/// ground-truth answer appears in the output.
bool validate_removal(const ProbeContext& ctx, const FinalizedTrajectory& finalized, std::size_t i,
                      const PruneConfig& cfg, const Problem& problem, Backend& backend);

/// Judge, validate each REMOVE by leave-one-out decoding, then check the
/// joint removal and re-add removed segments in order until it decodes the
/// answer. A judge response that fails to parse leaves everything kept.
OptimizedTrajectory prune(const ProbeContext& ctx, const FinalizedTrajectory& finalized,
                          Backend& judge_backend, Backend& policy_backend, const PruneConfig& cfg,
                          const Problem& problem);

/// {problem_id, sample, chunk, verdict, validated, removed}
nlohmann::json prune_audit_record(std::string_view problem_id, std::size_t sample_index,
                                  const PruneAuditEntry& entry);

}  // namespace dto
