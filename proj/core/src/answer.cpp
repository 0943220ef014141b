#include "dto/answer.hpp"

#include <cctype>
#include <charconv>
#include <cstdint>

#include "dto/errors.hpp"

namespace dto {
namespace {

constexpr std::string_view kBoxOpen = "\\boxed{";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Index of the brace closing the one at `open`, or npos.
std::size_t matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    if (text[i] == '{') {
      ++depth;
    } else if (text[i] == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

std::string apply_rule(std::string s, NormalizationRule rule) {
  switch (rule) {
    case NormalizationRule::trim: {
      std::size_t b = 0;
      std::size_t e = s.size();
      while (b < e && is_space(s[b])) ++b;
      while (e > b && is_space(s[e - 1])) --e;
      return s.substr(b, e - b);
    }
    case NormalizationRule::collapse_whitespace: {
      std::string out;
      out.reserve(s.size());
      bool in_space = false;
      for (char c : s) {
        if (is_space(c)) {
          if (!in_space) out.push_back(' ');
          in_space = true;
        } else {
          out.push_back(c);
          in_space = false;
        }
      }
      return out;
    }
    case NormalizationRule::strip_dollars:
      if (s.size() >= 2 && s.front() == '$' && s.back() == '$') return s.substr(1, s.size() - 2);
      return s;
    case NormalizationRule::strip_outer_braces:
      if (s.size() >= 2 && s.front() == '{' && matching_brace(s, 0) == s.size() - 1) {
        return s.substr(1, s.size() - 2);
      }
      return s;
  }
  return s;
}

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
};

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  if (s.empty()) return std::nullopt;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<Rational> parse_decimal(std::string_view s) {
  auto dot = s.find('.');
  if (dot == std::string_view::npos) {
    auto v = parse_int(s);
    if (!v) return std::nullopt;
    return Rational{*v, 1};
  }
  std::string digits(s.substr(0, dot));
  std::string_view frac = s.substr(dot + 1);
  if (frac.empty() || frac.size() > 15) return std::nullopt;
  for (char c : frac) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
  }
  if (digits.empty() || digits == "-" || digits == "+") digits += "0";
  auto whole = parse_int(digits);
  if (!whole) return std::nullopt;
  std::int64_t den = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
  auto f = parse_int(frac);
  if (!f) return std::nullopt;
  bool negative = !s.empty() && s.front() == '-';
  return Rational{*whole * den + (negative ? -*f : *f), den};
}

std::optional<Rational> parse_rational(std::string_view s) {
  if (s.starts_with("\\frac{")) {
    std::size_t a_open = 5;
    std::size_t a_close = matching_brace(s, a_open);
    if (a_close == std::string_view::npos || a_close + 1 >= s.size() || s[a_close + 1] != '{') {
      return std::nullopt;
    }
    std::size_t b_close = matching_brace(s, a_close + 1);
    if (b_close != s.size() - 1) return std::nullopt;
    auto a = parse_decimal(s.substr(a_open + 1, a_close - a_open - 1));
    auto b = parse_decimal(s.substr(a_close + 2, b_close - a_close - 2));
    if (!a || !b || b->num == 0) return std::nullopt;
    return Rational{a->num * b->den, a->den * b->num};
  }
  if (auto slash = s.find('/'); slash != std::string_view::npos) {
    auto a = parse_decimal(s.substr(0, slash));
    auto b = parse_decimal(s.substr(slash + 1));
    if (!a || !b || b->num == 0) return std::nullopt;
    return Rational{a->num * b->den, a->den * b->num};
  }
  return parse_decimal(s);
}

bool rational_equal(const Rational& a, const Rational& b) {
  return static_cast<__int128>(a.num) * b.den == static_cast<__int128>(b.num) * a.den;
}

}  // namespace

std::optional<std::string> extract_boxed(std::string_view text) {
  std::optional<std::string> last;
  std::size_t pos = text.find(kBoxOpen);
  while (pos != std::string_view::npos) {
    std::size_t open = pos + kBoxOpen.size() - 1;
    std::size_t close = matching_brace(text, open);
    if (close != std::string_view::npos) {
      last = std::string(text.substr(open + 1, close - open - 1));
    }
    pos = text.find(kBoxOpen, pos + 1);
  }
  return last;
}

std::string normalize_answer(std::string_view text, const std::vector<NormalizationRule>& rules) {
  std::string current(text);
  while (true) {
    std::string next = current;
    for (NormalizationRule rule : rules) next = apply_rule(std::move(next), rule);
    if (next == current) return current;
    current = std::move(next);
  }
}

bool answer_matches(std::string_view candidate, std::string_view ground_truth,
                    const AnswerMatchPolicy& policy) {
  if (ground_truth.empty()) throw InvalidArgument("answer_matches: ground truth is empty");
  const std::string truth = normalize_answer(ground_truth, policy.normalization);
  switch (policy.mode) {
    case MatchMode::containment: {
      if (truth.empty()) return true;
      return normalize_answer(candidate, policy.normalization).find(truth) != std::string::npos;
    }
    case MatchMode::boxed_equality: {
      auto boxed = extract_boxed(candidate);
      if (!boxed) return false;
      const std::string got = normalize_answer(*boxed, policy.normalization);
      if (got == truth) return true;
      if (policy.numeric_fallback) {
        auto a = parse_rational(got);
        auto b = parse_rational(truth);
        return a && b && rational_equal(*a, *b);
      }
      return false;
    }
  }
  return false;
}

}  // namespace dto
