#include "dto/pruner.hpp"

#include <cctype>
#include <future>
#include <regex>

#include "dto/answer.hpp"
#include "dto/errors.hpp"
#include "dto/hash.hpp"

namespace dto {

const std::string_view kDefaultJudgeTemplate = R"(You will be given:
1. A math problem
2. A ground-truth answer
3. A series of reasoning chunks

Your task has two parts:

STEP 1: Filtering
Decide for each chunk whether to KEEP AS IS or REMOVE.
KEEP AS IS if the chunk contributes meaningfully:
- Narrowing down possibilities
- Showing intermediate calculations
- Offering partial insight (even if incomplete)
- Reinforcing understanding through repetition
REMOVE if:
- It adds no meaningful content
- It is factually incorrect in a harmful way
- It is entirely off-topic or unhelpfully redundant

STEP 2: Final Reasoning Construction
Using only the KEPT chunks:
- Concatenate them with minimal edits for flow.
- Use each kept chunk verbatim.
- Do not paraphrase or skip ideas.
- Preserve the original tone (informal, exploratory, etc).
End the reasoning with the final answer in this format: \boxed{{...}}

Output Format:
[OUTPUT]

[CHUNK_FILTERING_RESULTS]
[Chunk 1] KEEP AS IS
[Chunk 2] REMOVE
...
[Chunk N] KEEP AS IS

[FINAL_RECONSTRUCTED_REASONING]
"""
<Clean explanation using only the kept chunks. Minimal edits for flow.
End with the boxed final answer.>
"""

Now here is your input:
### Problem:
{problem}

### Ground-Truth
{ground_truth_answer}

### Reasoning Chunks:
{thinking_patterns}
)";

namespace {

constexpr std::string_view kBoxMarker = "\\boxed";

bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

std::string rstrip(std::string_view s) {
  std::size_t e = s.size();
  while (e > 0 && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(0, e));
}

std::string compose(const FinalizedTrajectory& f, const std::set<std::size_t>& removed,
                    std::string_view tail) {
  std::string out;
  for (const auto& seg : f.kept.segments()) {
    if (!removed.contains(seg.index)) out += seg.text;
  }
  out += tail;
  return out;
}

}  // namespace

std::string_view to_string(Verdict v) noexcept { return v == Verdict::remove ? "REMOVE" : "KEEP AS IS"; }

void PruneConfig::validate() const {
  if (margin_tokens < 1) throw ConfigError("prune.margin_tokens must be >= 1");
  judge_params.validate();
  validation_params.validate();
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    const char c = tmpl[i];
    if (c == '{' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
      out.push_back('{');
      ++i;
    } else if (c == '}' && i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
      out.push_back('}');
      ++i;
    } else if (c == '{') {
      std::size_t j = i + 1;
      while (j < tmpl.size() && is_ident(tmpl[j])) ++j;
      if (j > i + 1 && j < tmpl.size() && tmpl[j] == '}') {
        const std::string name(tmpl.substr(i + 1, j - i - 1));
        auto it = values.find(name);
        if (it == values.end()) throw ConfigError("template placeholder {" + name + "} has no value");
        out += it->second;
        i = j;
      } else {
        out.push_back(c);
      }
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string format_chunks(const Trajectory& segments) {
  std::string out;
  for (const auto& seg : segments.segments()) {
    if (!out.empty()) out += "\n\n";
    out += "[Chunk " + std::to_string(seg.index) + "]\n" + rstrip(seg.text);
  }
  return out;
}

std::string render_judge_prompt(const Problem& problem, const FinalizedTrajectory& finalized,
                                std::string_view judge_template) {
  return render_template(judge_template, {{"problem", problem.statement},
                                          {"ground_truth_answer", problem.ground_truth},
                                          {"thinking_patterns", format_chunks(finalized.kept)}});
}

JudgeVerdicts parse_verdicts(std::string_view judge_response, std::size_t expected_n) {
  if (expected_n == 0) throw InvalidArgument("parse_verdicts: expected_n must be >= 1");
  static const std::regex line_re(R"(^\s*\[Chunk\s+(\d+)\]\s*(.*?)\s*$)");
  std::vector<std::optional<Verdict>> found(expected_n);

  std::size_t pos = 0;
  while (pos <= judge_response.size()) {
    std::size_t eol = judge_response.find('\n', pos);
    if (eol == std::string_view::npos) eol = judge_response.size();
    const std::string line(judge_response.substr(pos, eol - pos));
    pos = eol + 1;

    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    const std::string number = m[1].str();
    const std::size_t idx = number.size() > 6 ? 0 : std::stoul(number);
    if (idx == 0 || idx > expected_n) {
      throw JudgeParseError("verdict for chunk " + number + " outside 1.." + std::to_string(expected_n));
    }
    const std::string rest = m[2].str();
    if (rest.starts_with("KEEP AS IS")) {
      found[idx - 1] = Verdict::keep;
    } else if (rest.starts_with("REMOVE")) {
      found[idx - 1] = Verdict::remove;
    } else {
      throw JudgeParseError("malformed verdict for chunk " + number + ": '" + rest + "'");
    }
  }

  JudgeVerdicts out;
  out.raw_response = std::string(judge_response);
  for (std::size_t i = 0; i < expected_n; ++i) {
    if (!found[i]) throw JudgeParseError("no verdict for chunk " + std::to_string(i + 1));
    out.per_chunk.push_back(*found[i]);
  }
  return out;
}

std::string validation_text(const FinalizedTrajectory& finalized, const std::set<std::size_t>& removed) {
  std::string tail = finalized.separator + finalized.finalize_pattern;
  const std::string& closer = finalized.closer.text;
  const std::size_t box = closer.find(kBoxMarker);
  tail += box == std::string::npos ? closer : closer.substr(0, box);
  return compose(finalized, removed, tail);
}

namespace {

bool decode_yields_answer(const ProbeContext& ctx, const FinalizedTrajectory& finalized,
                          const std::set<std::size_t>& removed, const PruneConfig& cfg,
                          const Problem& problem, Backend& backend) {
  GenerationRequest req;
  req.prompt = ctx.prompt_prefix + validation_text(finalized, removed);
  req.params = cfg.validation_params;
  req.params.n = 1;
  req.params.max_tokens = static_cast<int>(backend.count_tokens(problem.ground_truth)) + cfg.margin_tokens;
  std::uint64_t removed_key = 0;
  for (std::size_t r : removed) removed_key = mix_seed({removed_key, r});
  const std::uint64_t seed = mix_seed({ctx.seed, fnv1a64(problem.id), removed_key, fnv1a64("validate")});
  req.params.seed = seed;
  req.correlation_id = seed;
  GenerationResult result = backend.generate(req);
  const AnswerMatchPolicy containment{};
  for (const auto& c : result.completions) {
    if (answer_matches(c.text, problem.ground_truth, containment)) return true;
  }
  return false;
}

}  // namespace

bool validate_removal(const ProbeContext& ctx, const FinalizedTrajectory& finalized, std::size_t i,
                      const PruneConfig& cfg, const Problem& problem, Backend& backend) {
  finalized.kept.at(i);  // range check
  return decode_yields_answer(ctx, finalized, {i}, cfg, problem, backend);
}

OptimizedTrajectory prune(const ProbeContext& ctx, const FinalizedTrajectory& finalized,
                          Backend& judge_backend, Backend& policy_backend, const PruneConfig& cfg,
                          const Problem& problem) {
  cfg.validate();
  const std::size_t n = finalized.kept.size();

  OptimizedTrajectory out;
  out.problem_id = problem.id;
  out.i_prime = n;
  out.closer_tokens = finalized.closer.tokens;

  GenerationRequest judge_req;
  judge_req.prompt = render_judge_prompt(problem, finalized, cfg.judge_template);
  judge_req.params = cfg.judge_params;
  judge_req.params.n = 1;
  const std::uint64_t judge_seed = mix_seed({ctx.seed, fnv1a64(problem.id), fnv1a64("judge")});
  judge_req.params.seed = judge_seed;
  judge_req.correlation_id = judge_seed;
  GenerationResult judged = judge_backend.generate(judge_req);
  out.judge_raw = judged.completions.empty() ? std::string() : judged.completions.front().text;

  std::vector<Verdict> verdicts(n, Verdict::keep);
  try {
    verdicts = parse_verdicts(out.judge_raw, n).per_chunk;
  } catch (const JudgeParseError& e) {
    out.judge_error = e.what();
  }

  std::vector<PruneAuditEntry> audit(n);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i <= n; ++i) {
    auto& entry = audit[i - 1];
    entry.chunk = i;
    entry.verdict = verdicts[i - 1];
    entry.is_protected = cfg.protect_first_segment && i == 1;
    if (entry.verdict == Verdict::remove && !entry.is_protected) candidates.push_back(i);
  }

  if (cfg.validate_each) {
    if (cfg.parallel_validations && candidates.size() > 1) {
      std::vector<std::future<bool>> pending;
      for (std::size_t i : candidates) {
        pending.push_back(std::async(std::launch::async, [&, i] {
          return validate_removal(ctx, finalized, i, cfg, problem, policy_backend);
        }));
      }
      for (std::size_t k = 0; k < candidates.size(); ++k) audit[candidates[k] - 1].validated = pending[k].get();
    } else {
      for (std::size_t i : candidates) {
        audit[i - 1].validated = validate_removal(ctx, finalized, i, cfg, problem, policy_backend);
      }
    }
  }

  std::set<std::size_t> removed;
  for (std::size_t i : candidates) {
    if (!cfg.validate_each || audit[i - 1].validated.value_or(false)) removed.insert(i);
  }

  if (!removed.empty()) {
    bool ok = decode_yields_answer(ctx, finalized, removed, cfg, problem, policy_backend);
    const std::vector<std::size_t> order(removed.begin(), removed.end());
    for (std::size_t i : order) {
      if (ok) break;
      removed.erase(i);
      audit[i - 1].rolled_back = true;
      ok = removed.empty() || decode_yields_answer(ctx, finalized, removed, cfg, problem, policy_backend);
    }
    out.final_check = ok;
  }

  for (std::size_t i = 1; i <= n; ++i) {
    const bool gone = removed.contains(i);
    audit[i - 1].removed = gone;
    (gone ? out.removed_indices : out.kept_indices).push_back(i);
  }
  out.prune_audit = std::move(audit);
  out.text = compose(finalized, removed, finalized.tail_text());
  out.token_count = policy_backend.count_tokens(out.text);
  return out;
}

nlohmann::json prune_audit_record(std::string_view problem_id, std::size_t sample_index,
                                  const PruneAuditEntry& entry) {
  nlohmann::json j = {{"problem_id", problem_id},
                      {"sample", sample_index},
                      {"chunk", entry.chunk},
                      {"verdict", to_string(entry.verdict)},
                      {"validated", nullptr},
                      {"removed", entry.removed}};
  if (entry.validated) j["validated"] = *entry.validated;
  if (entry.rolled_back) j["rolled_back"] = true;
  if (entry.is_protected) j["protected"] = true;
  return j;
}

}  // namespace dto
