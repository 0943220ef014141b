#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dto/backend.hpp"

namespace dto {

/// How a fixture rule's pattern is compared with the prompt.
enum class MatchKind {
  contains,  // pattern occurs anywhere (default)
  suffix,    // prompt ends with pattern
  prefix,    // prompt starts with pattern
  exact,
  glob,      // whole-prompt wildcard match; `*` is any run, `\*` a literal star
};

struct FixtureRule {
  std::string match;
  MatchKind kind = MatchKind::contains;
  std::vector<std::string> responses;  // served cyclically

  bool matches(std::string_view prompt) const;
};

/// Ordered list of canned-response rules; the first matching rule wins.
///
/// File form is JSONL, one rule per line:
///   {"match": "...", "kind": "suffix", "responses": ["..."], "mode": "cycle"}
/// `kind` defaults to "contains"; "cycle" is the only supported mode. Blank
/// lines and lines starting with '#' are ignored.
class ScriptedFixture {
 public:
  ScriptedFixture() = default;
  explicit ScriptedFixture(std::vector<FixtureRule> rules);

  static ScriptedFixture parse(std::istream& in);
  static ScriptedFixture load(const std::filesystem::path& path);

  void add(FixtureRule rule);
  const std::vector<FixtureRule>& rules() const noexcept { return rules_; }

  /// Index of the first rule matching `prompt`, or npos.
  std::size_t find(std::string_view prompt) const;

 private:
  std::vector<FixtureRule> rules_;
};

struct MockOptions {
  /// Random per-request delay in [0, max_latency], for arrival-order tests.
  std::chrono::microseconds max_latency{0};
  std::uint64_t latency_seed = 0;
};

/// Deterministic scripted backend.
///
/// Tokens are whitespace-separated words. Each (rule, prompt) pair keeps its
/// own cursor into the rule's cyclic response list, so the output depends
/// only on the sequence of identical prompts, not on how requests for
/// different prompts interleave.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(ScriptedFixture fixture, MockOptions options = {});

  GenerationResult generate(const GenerationRequest& request) override;
  std::size_t count_tokens(std::string_view text) override;
  std::vector<TokenLogprob> score(std::string_view prompt, std::string_view continuation) override;

  /// Number of generate() calls served.
  std::size_t calls() const;

  /// Deterministic stand-in logprob of one word.
  static double word_logprob(std::string_view word);

 private:
  ScriptedFixture fixture_;
  MockOptions options_;
  mutable std::mutex mu_;
  std::map<std::pair<std::size_t, std::uint64_t>, std::size_t> cursors_;
  std::size_t calls_ = 0;
};

/// Whitespace-separated word count.
std::size_t count_words(std::string_view text);

/// Words of `text` in order.
std::vector<std::string_view> split_words(std::string_view text);

}  // namespace dto
