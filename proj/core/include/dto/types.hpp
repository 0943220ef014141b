#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dto {

struct Problem {
  std::string id;
  std::string statement;
  std::string ground_truth;
  std::map<std::string, std::string> metadata;
};

/// Half-open byte range [begin, end) into some owning string.
struct ByteRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool empty() const noexcept { return begin == end; }
  friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

/// One thinking pattern: a verbatim slice of the deliberation block.
struct ThinkingPattern {
  std::size_t index = 0;  // 1-based
  std::string text;
  std::optional<std::string> cue;  // boundary marker that opened this segment

  friend bool operator==(const ThinkingPattern&, const ThinkingPattern&) = default;
};

/// A segmented model response.
///
/// The segments tile the deliberation block exactly: concatenating their
/// texts reproduces `source_text()[think_span]` byte for byte. The constructor
/// enforces this and the contiguity of the 1-based indices.
class Trajectory {
 public:
  Trajectory(std::vector<ThinkingPattern> segments, std::string source_text, ByteRange think_span,
             std::optional<ByteRange> answer_span = std::nullopt);

  const std::vector<ThinkingPattern>& segments() const noexcept { return segments_; }
  std::size_t size() const noexcept { return segments_.size(); }
  const ThinkingPattern& at(std::size_t index) const;  // 1-based

  const std::string& source_text() const noexcept { return source_text_; }
  ByteRange think_span() const noexcept { return think_span_; }
  const std::optional<ByteRange>& answer_span() const noexcept { return answer_span_; }

  std::string_view think_text() const noexcept;
  std::optional<std::string_view> answer_text() const;

  /// Concatenation of segments 1..count.
  std::string prefix_text(std::size_t count) const;

  /// The first `count` segments as a trajectory over the same source text.
  Trajectory prefix(std::size_t count) const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  std::vector<ThinkingPattern> segments_;
  std::string source_text_;
  ByteRange think_span_;
  std::optional<ByteRange> answer_span_;
};

struct SamplingParams {
  double temperature = 0.6;
  double top_p = 0.95;
  int max_tokens = 8192;
  int n = 1;
  std::optional<std::uint64_t> seed;

  /// Throws InvalidArgument when a bound is violated.
  void validate() const;
};

enum class MatchMode { containment, boxed_equality };

enum class NormalizationRule { trim, collapse_whitespace, strip_dollars, strip_outer_braces };

struct AnswerMatchPolicy {
  MatchMode mode = MatchMode::containment;
  std::vector<NormalizationRule> normalization = {
      NormalizationRule::trim, NormalizationRule::collapse_whitespace,
      NormalizationRule::strip_dollars, NormalizationRule::strip_outer_braces};
  // Compare as rationals when both sides parse as numbers (boxed_equality only).
  bool numeric_fallback = false;
};

std::string_view to_string(MatchMode mode) noexcept;
MatchMode parse_match_mode(std::string_view text);
std::string_view to_string(NormalizationRule rule) noexcept;
NormalizationRule parse_normalization_rule(std::string_view text);

}  // namespace dto
