#include <cstdio>

#include "dto/errors.hpp"
#include "dto/hash.hpp"
#include "dto/types.hpp"

namespace dto {

Trajectory::Trajectory(std::vector<ThinkingPattern> segments, std::string source_text,
                       ByteRange think_span, std::optional<ByteRange> answer_span)
    : segments_(std::move(segments)),
      source_text_(std::move(source_text)),
      think_span_(think_span),
      answer_span_(answer_span) {
  if (segments_.empty()) throw InvalidArgument("trajectory needs at least one segment");
  if (think_span_.begin > think_span_.end || think_span_.end > source_text_.size()) {
    throw InvalidArgument("think span outside source text");
  }
  if (answer_span_ && (answer_span_->begin > answer_span_->end ||
                       answer_span_->end > source_text_.size())) {
    throw InvalidArgument("answer span outside source text");
  }
  std::size_t offset = think_span_.begin;
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const auto& seg = segments_[k];
    if (seg.index != k + 1) throw InvalidArgument("segment indices must be contiguous from 1");
    if (seg.text.empty()) throw InvalidArgument("segment text must be non-empty");
    if (source_text_.compare(offset, seg.text.size(), seg.text) != 0) {
      throw InvalidArgument("segments do not tile the think span");
    }
    offset += seg.text.size();
  }
  if (offset != think_span_.end) throw InvalidArgument("segments do not cover the think span");
}

const ThinkingPattern& Trajectory::at(std::size_t index) const {
  if (index == 0 || index > segments_.size()) {
    throw IndexOutOfRange("segment index " + std::to_string(index) + " outside 1.." +
                          std::to_string(segments_.size()));
  }
  return segments_[index - 1];
}

std::string_view Trajectory::think_text() const noexcept {
  return std::string_view(source_text_).substr(think_span_.begin, think_span_.size());
}

std::optional<std::string_view> Trajectory::answer_text() const {
  if (!answer_span_) return std::nullopt;
  return std::string_view(source_text_).substr(answer_span_->begin, answer_span_->size());
}

std::string Trajectory::prefix_text(std::size_t count) const {
  if (count > segments_.size()) {
    throw IndexOutOfRange("prefix of " + std::to_string(count) + " segments exceeds " +
                          std::to_string(segments_.size()));
  }
  std::string out;
  for (std::size_t k = 0; k < count; ++k) out += segments_[k].text;
  return out;
}

Trajectory Trajectory::prefix(std::size_t count) const {
  if (count == 0 || count > segments_.size()) {
    throw IndexOutOfRange("prefix length " + std::to_string(count) + " outside 1.." +
                          std::to_string(segments_.size()));
  }
  std::vector<ThinkingPattern> kept(segments_.begin(), segments_.begin() + count);
  std::size_t end = think_span_.begin;
  for (const auto& seg : kept) end += seg.text.size();
  return Trajectory(std::move(kept), source_text_, ByteRange{think_span_.begin, end});
}

void SamplingParams::validate() const {
  if (!(temperature >= 0.0)) throw InvalidArgument("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw InvalidArgument("top_p must be in (0, 1]");
  if (max_tokens < 0) throw InvalidArgument("max_tokens must be >= 0");
  if (n < 1) throw InvalidArgument("n must be >= 1");
}

std::string_view to_string(MatchMode mode) noexcept {
  switch (mode) {
    case MatchMode::containment: return "containment";
    case MatchMode::boxed_equality: return "boxed_equality";
  }
  return "containment";
}

MatchMode parse_match_mode(std::string_view text) {
  if (text == "containment") return MatchMode::containment;
  if (text == "boxed_equality") return MatchMode::boxed_equality;
  throw ConfigError("unknown match mode: " + std::string(text));
}

std::string_view to_string(NormalizationRule rule) noexcept {
  switch (rule) {
    case NormalizationRule::trim: return "trim";
    case NormalizationRule::collapse_whitespace: return "collapse_whitespace";
    case NormalizationRule::strip_dollars: return "strip_dollars";
    case NormalizationRule::strip_outer_braces: return "strip_outer_braces";
  }
  return "trim";
}

NormalizationRule parse_normalization_rule(std::string_view text) {
  if (text == "trim") return NormalizationRule::trim;
  if (text == "collapse_whitespace") return NormalizationRule::collapse_whitespace;
  if (text == "strip_dollars") return NormalizationRule::strip_dollars;
  if (text == "strip_outer_braces") return NormalizationRule::strip_outer_braces;
  throw ConfigError("unknown normalization rule: " + std::string(text));
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace dto
