#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "droidsynth/provider.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "droidsynth/error.hpp"

namespace droidsynth {
namespace {

bool retryable(int status) {
  return status == 408 || status == 409 || status == 429 || (status >= 500 && status <= 599);
}

std::string provider_message(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (!j.is_discarded() && j.is_object() && j.contains("error")) {
    const auto& e = j["error"];
    if (e.is_object() && e.contains("message") && e["message"].is_string()) {
      return e["message"].get<std::string>();
    }
    if (e.is_string()) return e.get<std::string>();
  }
  return body.substr(0, 500);
}

bool mentions_moderation(const std::string& text) {
  std::string lower = text;
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower.find("moderation") != std::string::npos ||
         lower.find("safety") != std::string::npos || lower.find("policy") != std::string::npos;
}

}  // namespace

void GenerationConfig::check() const {
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw UsageError("generation: temperature must be within [0, 2]");
  }
  if (max_tokens <= 0) throw UsageError("generation: max_tokens must be positive");
  if (max_retries < 0) throw UsageError("generation: max_retries must be >= 0");
  if (max_in_flight < 1) throw UsageError("generation: max_in_flight must be >= 1");
}

std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw UsageError("endpoint url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

ProviderClient::ProviderClient(GenerationConfig config) : config_(std::move(config)) {
  config_.check();
  if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  std::tie(scheme_host_port_, base_path_) = split_endpoint(config_.endpoint_url);
}

ProviderClient::Response ProviderClient::with_retries(const std::function<Response()>& attempt,
                                                      const std::string& what) {
  std::string last_error;
  Response last;
  for (int i = 0; i <= config_.max_retries; ++i) {
    if (i > 0) std::this_thread::sleep_for(config_.initial_backoff * (1LL << (i - 1)));
    ++attempts_;
    Response r = attempt();
    last = r;
    if (r.status >= 200 && r.status < 300) return r;
    if (r.status == 0) {
      last_error = what + ": transport error: " + r.body;
      continue;
    }
    std::string message = provider_message(r.body);
    if (!retryable(r.status)) {
      std::string full = what + ": HTTP " + std::to_string(r.status) + ": " + message;
      if (!r.request_id.empty()) full += " (request id " + r.request_id + ")";
      if (mentions_moderation(message)) {
        full += "; the provider's moderation rejected the input, re-check the sanitization rules";
      }
      throw ProviderError(full, r.status, r.request_id);
    }
    last_error = what + ": HTTP " + std::to_string(r.status) + ": " + message;
    if (!r.request_id.empty()) last_error += " (request id " + r.request_id + ")";
  }
  throw ProviderError(last_error + " (gave up after " + std::to_string(config_.max_retries) +
                      " retries)",
                      last.status, last.request_id);
}

nlohmann::json ProviderClient::post_json(const std::string& path, const nlohmann::json& body) {
  const std::string payload = body.dump();
  Response r = with_retries(
      [&] {
        httplib::Client cli(scheme_host_port_);
        cli.set_connection_timeout(config_.request_timeout);
        cli.set_read_timeout(config_.request_timeout);
        cli.set_write_timeout(config_.request_timeout);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = cli.Post(base_path_ + path, headers, payload, "application/json");
        if (!res) return Response{0, httplib::to_string(res.error()), {}};
        return Response{res->status, res->body, res->get_header_value("x-request-id")};
      },
      "POST " + path);
  auto j = nlohmann::json::parse(r.body, nullptr, false);
  if (j.is_discarded()) throw ProviderError("POST " + path + ": response is not JSON", r.status);
  return j;
}

std::string ProviderClient::generate_record(const GenerationPrompts& prompts) {
  nlohmann::json body = {
      {"model", config_.model_id},
      {"temperature", config_.temperature},
      {"max_tokens", config_.max_tokens},
      {"messages",
       {{{"role", "system"}, {"content", prompts.system}},
        {{"role", "user"}, {"content", prompts.user}}}}};
  auto j = post_json("/chat/completions", body);
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw ProviderError("chat completion response has no choices[0].message.content");
  }
}

std::string ProviderClient::submit_finetune_job(const std::string& corpus_path, int epochs) {
  if (epochs < 1) throw UsageError("submit_finetune_job: epochs must be >= 1");
  std::ifstream in(corpus_path, std::ios::binary);
  if (!in) throw DataError("submit_finetune_job: cannot open " + corpus_path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string corpus = buffer.str();
  if (parse_corpus(corpus).empty()) throw DataError("submit_finetune_job: corpus is empty");

  Response upload = with_retries(
      [&] {
        httplib::Client cli(scheme_host_port_);
        cli.set_connection_timeout(config_.request_timeout);
        cli.set_read_timeout(config_.request_timeout);
        cli.set_write_timeout(config_.request_timeout);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        httplib::MultipartFormDataItems items = {
            {"purpose", "fine-tune", "", ""},
            {"file", corpus, "finetune.jsonl", "application/jsonl"}};
        auto res = cli.Post(base_path_ + "/files", headers, items);
        if (!res) return Response{0, httplib::to_string(res.error()), {}};
        return Response{res->status, res->body, res->get_header_value("x-request-id")};
      },
      "POST /files");
  auto file = nlohmann::json::parse(upload.body, nullptr, false);
  if (file.is_discarded() || !file.contains("id") || !file["id"].is_string()) {
    throw ProviderError("POST /files: response carries no file id", upload.status);
  }

  nlohmann::json job_body = {{"training_file", file["id"]},
                             {"model", config_.model_id},
                             {"hyperparameters", {{"n_epochs", epochs}}}};
  auto job = post_json("/fine_tuning/jobs", job_body);
  if (!job.contains("id") || !job["id"].is_string()) {
    throw ProviderError("POST /fine_tuning/jobs: response carries no job id");
  }
  return job["id"].get<std::string>();
}

std::vector<std::string> generate_batch(ProviderClient& client,
                                        const std::function<GenerationPrompts(std::size_t)>& prompts,
                                        std::size_t first, std::size_t count) {
  std::vector<std::string> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(client.config().max_in_flight), count);
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        out[i] = client.generate_record(prompts(first + i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work);
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace droidsynth
