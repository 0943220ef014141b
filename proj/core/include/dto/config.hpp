#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dto/backend.hpp"
#include "dto/exit_probe.hpp"
#include "dto/finalizer.hpp"
#include "dto/http_backend.hpp"
#include "dto/io.hpp"
#include "dto/metrics.hpp"
#include "dto/pruner.hpp"
#include "dto/segmenter.hpp"
#include "dto/simpo.hpp"

namespace dto {

inline constexpr std::string_view kDefaultPromptTemplate =
    "Please reason step by step, and put your final answer within \\boxed{}.\n\n{{ problem }}";

inline constexpr std::string_view kFastPromptTemplate =
    "Please reason step by step, and put your final answer within \\boxed{}.\n\n"
    "Solve the problem as quickly as possible.\n\n{{ problem }}";

/// Where a role's requests go: an HTTP endpoint, or a scripted fixture when
/// `mock_fixture` is set.
struct BackendSpec {
  HttpBackendConfig http;
  std::string env_prefix;  // e.g. "DTO_POLICY"; empty disables overrides
  std::optional<std::filesystem::path> mock_fixture;
};

struct RunConfig {
  BackendSpec policy{{}, "DTO_POLICY", std::nullopt};
  BackendSpec judge{{}, "DTO_JUDGE", std::nullopt};

  std::string prompt_template{kDefaultPromptTemplate};
  std::string assistant_prefix = "\n<think>\n";  // appended to the rendered prompt before sampling
  ResponseFraming framing;
  std::vector<std::string> cues{"Wait", "Alternatively", "Hmm", "But wait", "However"};
  Granularity granularity = Granularity::paragraph;

  SamplingParams sampling{0.6, 0.95, 8192, 1, std::nullopt};
  SampleStrategy sample_strategy = SampleStrategy::single_request;
  ExitConfig exit;
  FinalizeConfig finalize;
  PruneConfig prune;
  SimpoConfig simpo;
  EvaluationConfig evaluation;

  std::size_t N = 2;
  std::size_t samples_per_problem = 4;
  std::uint64_t run_seed = 0;
  int workers = 4;
  DatasetFields fields;
  double max_failure_rate = 1.0;

  CueLexicon lexicon() const;

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;
};

/// Missing keys keep their defaults; unknown keys raise ConfigError.
/// `prompt_template` may be "default", "fast" or literal template text, and
/// simpo may give "gamma_over_beta" instead of "gamma".
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Full configuration without secrets.
nlohmann::json to_json(const RunConfig& cfg);

/// Hash of every setting that affects outputs; backend locations and
/// concurrency knobs are left out so the same run from a different checkout
/// or worker count hashes the same.
std::uint64_t config_hash(const RunConfig& cfg);

/// Applies <PREFIX>_BASE_URL/_API_KEY/_MODEL for both roles.
void apply_env_overrides(RunConfig& cfg);

/// Replaces `{{ problem }}` (or `{{problem}}`) with the statement.
std::string render_task_prompt(std::string_view tmpl, std::string_view statement);

std::unique_ptr<Backend> make_backend(const BackendSpec& spec);

/// "mock:<fixture content hash>" or "http:<model>", independent of paths.
std::string backend_identity(const BackendSpec& spec);

}  // namespace dto
