#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dto/types.hpp"

namespace dto {

enum class Granularity { paragraph, sentence };

std::string_view to_string(Granularity g) noexcept;
Granularity parse_granularity(std::string_view text);

/// Boundary markers that open a new thinking pattern.
///
/// No cue may be a prefix of another, so at most one cue matches at any
/// position.
class CueLexicon {
 public:
  explicit CueLexicon(std::vector<std::string> cues, Granularity granularity = Granularity::paragraph);

  /// {"Wait", "Alternatively", "Hmm", "But wait", "However"}, paragraph units.
  static CueLexicon defaults();

  const std::vector<std::string>& cues() const noexcept { return cues_; }
  Granularity granularity() const noexcept { return granularity_; }

  /// The cue starting at `pos` and followed by a non-word character or the
  /// end of text.
  std::optional<std::string_view> match_at(std::string_view text, std::size_t pos) const;

 private:
  std::vector<std::string> cues_;
  Granularity granularity_;
};

/// Delimiters framing the deliberation block of a raw response.
struct ResponseFraming {
  std::string open = "<think>";
  std::string close = "</think>";
};

struct ResponseParts {
  ByteRange think;
  std::optional<ByteRange> answer;
};

/// Locates the deliberation and answer blocks. Without a close delimiter the
/// whole response (after an optional open delimiter) is deliberation.
ResponseParts split_response(std::string_view response, const ResponseFraming& framing);

/// Offsets where granularity units begin (first non-whitespace byte of each
/// unit after the first). Offset 0 is not included.
std::vector<std::size_t> unit_starts(std::string_view text, Granularity granularity);

/// Splits a deliberation block into thinking patterns. Separators stay with
/// the preceding segment, so the segments concatenate back to `think_text`.
/// Throws EmptyInput on empty text.
Trajectory segment(std::string_view think_text, const CueLexicon& lexicon);

/// split_response followed by segment, keeping spans into the full response.
Trajectory segment_response(std::string response, const CueLexicon& lexicon,
                            const ResponseFraming& framing = {});

/// Whole-word, case-sensitive occurrences of `cue`.
std::size_t count_cue(std::string_view text, std::string_view cue);

}  // namespace dto
