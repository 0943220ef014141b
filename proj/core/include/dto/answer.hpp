#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dto/types.hpp"

namespace dto {

/// Content of the last brace-balanced `\boxed{...}` group, if any.
std::optional<std::string> extract_boxed(std::string_view text);

/// Applies the rules in order, repeating the pass until the string stops
/// changing, so the result is a fixed point (normalize is idempotent).
std::string normalize_answer(std::string_view text, const std::vector<NormalizationRule>& rules);

/// Containment: normalized ground truth is a substring of the normalized
/// candidate. Boxed equality: the last boxed group normalizes to the
/// normalized ground truth. `ground_truth` must be non-empty.
bool answer_matches(std::string_view candidate, std::string_view ground_truth,
                    const AnswerMatchPolicy& policy);

}  // namespace dto
