#include "dto/segmenter.hpp"

#include <cctype>

#include "dto/errors.hpp"

namespace dto {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// ASCII letters, digits and underscore. UTF-8 continuation bytes count as
// punctuation so that "Wait…" still ends at a word boundary.
bool is_word(char c) {
  auto u = static_cast<unsigned char>(c);
  return u < 0x80 && (std::isalnum(u) != 0 || u == '_');
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace

std::string_view to_string(Granularity g) noexcept {
  return g == Granularity::sentence ? "sentence" : "paragraph";
}

Granularity parse_granularity(std::string_view text) {
  if (text == "paragraph") return Granularity::paragraph;
  if (text == "sentence") return Granularity::sentence;
  throw ConfigError("unknown granularity: " + std::string(text));
}

CueLexicon::CueLexicon(std::vector<std::string> cues, Granularity granularity)
    : cues_(std::move(cues)), granularity_(granularity) {
  if (cues_.empty()) throw InvalidArgument("cue lexicon must not be empty");
  for (std::size_t a = 0; a < cues_.size(); ++a) {
    if (cues_[a].empty()) throw InvalidArgument("cue must not be empty");
    for (std::size_t b = 0; b < cues_.size(); ++b) {
      if (a != b && cues_[b].starts_with(cues_[a])) {
        throw InvalidArgument("cue '" + cues_[a] + "' is a prefix of '" + cues_[b] + "'");
      }
    }
  }
}

CueLexicon CueLexicon::defaults() {
  return CueLexicon({"Wait", "Alternatively", "Hmm", "But wait", "However"});
}

std::optional<std::string_view> CueLexicon::match_at(std::string_view text, std::size_t pos) const {
  for (const auto& cue : cues_) {
    if (text.compare(pos, cue.size(), cue) != 0) continue;
    std::size_t after = pos + cue.size();
    if (after == text.size() || !is_word(text[after])) return std::string_view(cue);
  }
  return std::nullopt;
}

ResponseParts split_response(std::string_view response, const ResponseFraming& framing) {
  std::size_t begin = 0;
  if (!framing.open.empty()) {
    // Only a leading open delimiter (possibly after whitespace) frames the block.
    std::size_t first = 0;
    while (first < response.size() && is_space(response[first])) ++first;
    if (response.compare(first, framing.open.size(), framing.open) == 0) {
      begin = first + framing.open.size();
    }
  }
  if (!framing.close.empty()) {
    std::size_t close = response.find(framing.close, begin);
    if (close != std::string_view::npos) {
      return {ByteRange{begin, close}, ByteRange{close + framing.close.size(), response.size()}};
    }
  }
  return {ByteRange{begin, response.size()}, std::nullopt};
}

std::vector<std::size_t> unit_starts(std::string_view text, Granularity granularity) {
  std::vector<std::size_t> starts;
  std::size_t i = 0;
  // Skip the first unit's leading whitespace; it never forms a boundary.
  while (i < text.size() && is_space(text[i])) ++i;
  while (i < text.size()) {
    // Advance to the next whitespace run.
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i >= text.size()) break;
    const char before = text[i - 1];
    std::size_t newlines = 0;
    while (i < text.size() && is_space(text[i])) {
      if (text[i] == '\n') ++newlines;
      ++i;
    }
    if (i >= text.size()) break;
    bool boundary = newlines >= 2;
    if (granularity == Granularity::sentence && is_terminator(before)) boundary = true;
    if (boundary) starts.push_back(i);
  }
  return starts;
}

Trajectory segment(std::string_view think_text, const CueLexicon& lexicon) {
  if (think_text.empty()) throw EmptyInput("segment: deliberation text is empty");
  std::string source(think_text);

  std::vector<std::pair<std::size_t, std::optional<std::string>>> cuts;
  {
    std::size_t first = 0;
    while (first < think_text.size() && is_space(think_text[first])) ++first;
    std::optional<std::string> cue;
    if (first < think_text.size()) {
      if (auto m = lexicon.match_at(think_text, first)) cue = std::string(*m);
    }
    cuts.emplace_back(0, std::move(cue));
  }
  for (std::size_t start : unit_starts(think_text, lexicon.granularity())) {
    if (auto m = lexicon.match_at(think_text, start)) cuts.emplace_back(start, std::string(*m));
  }

  std::vector<ThinkingPattern> segments;
  segments.reserve(cuts.size());
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    std::size_t b = cuts[k].first;
    std::size_t e = k + 1 < cuts.size() ? cuts[k + 1].first : think_text.size();
    segments.push_back(ThinkingPattern{k + 1, source.substr(b, e - b), cuts[k].second});
  }
  const std::size_t n = source.size();
  return Trajectory(std::move(segments), std::move(source), ByteRange{0, n});
}

Trajectory segment_response(std::string response, const CueLexicon& lexicon,
                            const ResponseFraming& framing) {
  ResponseParts parts = split_response(response, framing);
  Trajectory inner = segment(std::string_view(response).substr(parts.think.begin, parts.think.size()),
                             lexicon);
  return Trajectory(inner.segments(), std::move(response), parts.think, parts.answer);
}

std::size_t count_cue(std::string_view text, std::string_view cue) {
  if (cue.empty()) throw InvalidArgument("count_cue: cue is empty");
  std::size_t count = 0;
  for (std::size_t pos = text.find(cue); pos != std::string_view::npos;
       pos = text.find(cue, pos + 1)) {
    bool left = pos == 0 || !is_word(text[pos - 1]);
    std::size_t after = pos + cue.size();
    bool right = after == text.size() || !is_word(text[after]);
    if (left && right) ++count;
  }
  return count;
}

}  // namespace dto
