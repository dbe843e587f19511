#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "droidsynth/synth_gen.hpp"

namespace droidsynth {

struct GenerationConfig {
  // Base URL including the API prefix, e.g. https://api.openai.com/v1
  std::string endpoint_url = "https://api.openai.com/v1";
  std::string model_id = "gpt-4.1-mini-2025-04-14";
  double temperature = 0.7;
  std::int64_t max_tokens = 16384;
  std::string family_alias;
  std::chrono::milliseconds request_timeout{120000};
  int max_retries = 5;
  std::chrono::milliseconds initial_backoff{1000};
  int max_in_flight = 4;
  std::string api_key_env = "OPENAI_API_KEY";

  // Throws UsageError when temperature is outside [0, 2] or max_tokens <= 0.
  void check() const;
};

/// Minimal OpenAI-compatible REST client for chat completions and fine-tuning.
///
/// Transport failures, 408, 409, 429 and 5xx responses are retried with
/// exponential backoff (initial_backoff * 2^attempt) up to max_retries extra
/// attempts. Other non-2xx responses fail immediately with the provider's
/// error message. Safe for concurrent use; each call opens its own connection.
class ProviderClient {
 public:
  // Reads the API key from config.api_key_env; an unset variable is allowed
  // for local mock endpoints.
  explicit ProviderClient(GenerationConfig config);

  const GenerationConfig& config() const { return config_; }
  // Number of HTTP attempts made so far, including retries.
  std::size_t attempts() const { return attempts_; }

  // Returns the first completion's message content.
  std::string generate_record(const GenerationPrompts& prompts);

  // Uploads the corpus file (purpose=fine-tune) and creates a job. The corpus
  // is validated locally before any request is sent.
  std::string submit_finetune_job(const std::string& corpus_path, int epochs);

  // Raw JSON POST with retry; exposed for tests.
  nlohmann::json post_json(const std::string& path, const nlohmann::json& body);

 private:
  struct Response {
    int status = 0;
    std::string body;
    std::string request_id;
  };
  Response with_retries(const std::function<Response()>& attempt, const std::string& what);

  GenerationConfig config_;
  std::string api_key_;
  std::string scheme_host_port_;
  std::string base_path_;
  std::atomic<std::size_t> attempts_{0};
};

// Splits "https://host:port/v1" into ("https://host:port", "/v1").
std::pair<std::string, std::string> split_endpoint(const std::string& url);

// Issues generation requests for record numbers [first, first + count) with at
// most max_in_flight concurrent requests. Results are returned in record order.
std::vector<std::string> generate_batch(ProviderClient& client,
                                        const std::function<GenerationPrompts(std::size_t)>& prompts,
                                        std::size_t first, std::size_t count);

}  // namespace droidsynth
