#pragma once

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>

#include "dto/backend.hpp"

namespace dto {

struct HttpBackendConfig {
  /// Scheme, host, optional port and path prefix, e.g. "http://localhost:30000/v1".
  std::string base_url = "http://localhost:30000/v1";
  std::string api_key;
  std::string model;
  std::string completions_path = "/completions";  // appended to base_url
  std::string tokenize_path = "/tokenize";        // relative to the host root
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds max_backoff{5000};
  std::chrono::seconds timeout{600};
  int max_in_flight = 8;

  /// Reads <PREFIX>_BASE_URL, <PREFIX>_API_KEY and <PREFIX>_MODEL, keeping
  /// `defaults` for variables that are unset.
  static HttpBackendConfig from_env(std::string_view prefix, HttpBackendConfig defaults);
  static HttpBackendConfig from_env(std::string_view prefix);
};

/// Client for an OpenAI-style text completion endpoint.
///
/// Transport failures and 5xx responses are retried with exponential backoff
/// up to `max_retries` times, then raise BackendUnavailable. HTTP 429 honours
/// Retry-After and surfaces as RateLimited once retries run out. At most
/// `max_in_flight` requests are outstanding per instance.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  ~HttpBackend() override;

  GenerationResult generate(const GenerationRequest& request) override;
  std::size_t count_tokens(std::string_view text) override;
  std::vector<TokenLogprob> score(std::string_view prompt, std::string_view continuation) override;

  const HttpBackendConfig& config() const noexcept { return config_; }

 private:
  struct Endpoint;

  std::string post(const std::string& path, const std::string& body);

  HttpBackendConfig config_;
  std::unique_ptr<Endpoint> endpoint_;
  std::counting_semaphore<> in_flight_;
};

}  // namespace dto
