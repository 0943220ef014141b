#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dto/types.hpp"

namespace dto {

enum class FinishReason { stop, length };

std::string_view to_string(FinishReason reason) noexcept;

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;  // <= 0
};

struct Completion {
  std::string text;
  std::optional<std::vector<TokenLogprob>> token_logprobs;
  FinishReason finish_reason = FinishReason::stop;
  std::size_t tokens = 0;  // backend tokens in `text`

  /// Sum of token logprobs; nullopt when logprobs were not requested.
  std::optional<double> sequence_logprob() const;
};

struct Usage {
  std::size_t prompt_tokens = 0;
  std::vector<std::size_t> completion_tokens;  // one entry per completion
};

struct GenerationRequest {
  std::string prompt;
  SamplingParams params;
  std::vector<std::string> stop;
  bool logprobs = false;
  std::uint64_t correlation_id = 0;
};

struct GenerationResult {
  std::uint64_t correlation_id = 0;
  std::vector<Completion> completions;
  Usage usage;
};

/// Text-generation backend. Implementations are safe to share between
/// threads.
class Backend {
 public:
  virtual ~Backend() = default;

  /// Returns exactly `request.params.n` completions.
  virtual GenerationResult generate(const GenerationRequest& request) = 0;

  virtual std::size_t count_tokens(std::string_view text) = 0;

  /// Teacher-forced logprobs of `continuation` given `prompt`. Throws
  /// MissingLogprobs when the backend cannot score.
  virtual std::vector<TokenLogprob> score(std::string_view prompt, std::string_view continuation) = 0;
};

/// How M samples are drawn: one request with n=M, or M requests with n=1.
enum class SampleStrategy { single_request, per_sample };

std::string_view to_string(SampleStrategy s) noexcept;
SampleStrategy parse_sample_strategy(std::string_view text);

/// Draws `params.n` completions following `strategy`. With per_sample and a
/// seed, request j uses a seed derived from (seed, j).
GenerationResult sample(Backend& backend, GenerationRequest request, SampleStrategy strategy);

}  // namespace dto
