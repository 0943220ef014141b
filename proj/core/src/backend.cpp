#include "dto/backend.hpp"

#include "dto/errors.hpp"
#include "dto/hash.hpp"

namespace dto {

std::string_view to_string(FinishReason reason) noexcept {
  return reason == FinishReason::length ? "length" : "stop";
}

std::optional<double> Completion::sequence_logprob() const {
  if (!token_logprobs) return std::nullopt;
  double sum = 0.0;
  for (const auto& t : *token_logprobs) sum += t.logprob;
  return sum;
}

std::string_view to_string(SampleStrategy s) noexcept {
  return s == SampleStrategy::per_sample ? "per_sample" : "single_request";
}

SampleStrategy parse_sample_strategy(std::string_view text) {
  if (text == "single_request") return SampleStrategy::single_request;
  if (text == "per_sample") return SampleStrategy::per_sample;
  throw ConfigError("unknown sample strategy: " + std::string(text));
}

GenerationResult sample(Backend& backend, GenerationRequest request, SampleStrategy strategy) {
  request.params.validate();
  if (strategy == SampleStrategy::single_request || request.params.n == 1) {
    return backend.generate(request);
  }
  const int n = request.params.n;
  GenerationResult merged;
  merged.correlation_id = request.correlation_id;
  for (int j = 0; j < n; ++j) {
    GenerationRequest one = request;
    one.params.n = 1;
    if (request.params.seed) {
      one.params.seed = mix_seed({*request.params.seed, static_cast<std::uint64_t>(j)});
    }
    one.correlation_id = mix_seed({request.correlation_id, static_cast<std::uint64_t>(j)});
    GenerationResult part = backend.generate(one);
    if (part.completions.size() != 1) {
      throw BackendError("backend returned " + std::to_string(part.completions.size()) +
                         " completions for n=1");
    }
    merged.usage.prompt_tokens = part.usage.prompt_tokens;
    merged.usage.completion_tokens.push_back(part.completions.front().tokens);
    merged.completions.push_back(std::move(part.completions.front()));
  }
  return merged;
}

}  // namespace dto
