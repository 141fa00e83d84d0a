#pragma once

// OpenAI-compatible HTTP backends: POST {base_url}/chat/completions and {base_url}/embeddings.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "trllm/embedding.hpp"
#include "trllm/errors.hpp"
#include "trllm/llm_bridge.hpp"

namespace trllm {

struct LlmEndpointConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string model_name;
  std::optional<std::string> api_key;
  double temperature = 0.0;
  double timeout_s = 60.0;
  int max_retries = 3;
  double backoff_base_s = 1.0;  // delay before retry n is base * 2^(n-1)
  int max_parallel = 4;

  void validate() const {
    if (!(timeout_s > 0.0)) throw ContractError("endpoint config: timeout must be positive");
    if (max_retries < 0) throw ContractError("endpoint config: max_retries must be >= 0");
    if (backoff_base_s < 0.0) throw ContractError("endpoint config: backoff must be >= 0");
    if (max_parallel < 1) throw ContractError("endpoint config: max_parallel must be >= 1");
  }

  // TRLLM_API_KEY takes precedence over the configured key.
  std::optional<std::string> effective_api_key() const {
    if (const char* env = std::getenv("TRLLM_API_KEY"); env && *env) return std::string(env);
    return api_key;
  }
};

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // prefix without trailing '/'
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ContractError("endpoint config: base_url needs a scheme: '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  out.path = path_start == std::string::npos ? std::string{} : url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

// POSTs `body` with retries on transport failures, 429 and 5xx.
inline nlohmann::json post_json_with_retry(const LlmEndpointConfig& cfg, const std::string& endpoint,
                                           const nlohmann::json& body) {
  cfg.validate();
  const auto url = split_url(cfg.base_url);
  httplib::Headers headers;
  if (auto key = cfg.effective_api_key()) headers.emplace("Authorization", "Bearer " + *key);
  const auto payload = body.dump();
  const auto secs = static_cast<time_t>(cfg.timeout_s);
  const auto usecs = static_cast<time_t>((cfg.timeout_s - static_cast<double>(secs)) * 1e6);

  std::string last_failure = "no attempt made";
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(cfg.backoff_base_s * std::pow(2.0, attempt - 1)));
    }
    httplib::Client client(url.origin);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(url.path + endpoint, headers, payload, "application/json");
    if (!res) {
      last_failure = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status >= 400) {
      throw RequestError(res->status, "HTTP " + std::to_string(res->status) + " from " + endpoint + ": " + res->body);
    }
    if (res->status < 200 || res->status >= 300) {
      throw ProtocolError("unexpected HTTP " + std::to_string(res->status) + " from " + endpoint);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
      throw ProtocolError("response from " + endpoint + " is not JSON");
    }
  }
  throw TransportError(endpoint + " failed after " + std::to_string(cfg.max_retries + 1) +
                       " attempts: " + last_failure);
}

}  // namespace detail

// Assistant text of a single-user-message chat completion.
inline std::string chat_complete(const LlmEndpointConfig& cfg, const std::string& prompt) {
  nlohmann::json body = {{"model", cfg.model_name},
                         {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                         {"temperature", cfg.temperature}};
  const auto reply = detail::post_json_with_retry(cfg, "/chat/completions", body);
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw ProtocolError("chat completion: message content is not a string");
    return content.get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("chat completion: response has no choices[0].message.content");
  }
}

// Bounds the number of in-flight requests across threads sharing this backend.
class HttpChatBackend final : public ChatBackend {
public:
  explicit HttpChatBackend(LlmEndpointConfig cfg)
      : cfg_(std::move(cfg)), slots_(std::make_shared<std::counting_semaphore<>>(cfg_.max_parallel)) {
    cfg_.validate();
  }

  std::string complete(const std::string& prompt) const override {
    slots_->acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{*slots_};
    return chat_complete(cfg_, prompt);
  }

  const LlmEndpointConfig& config() const { return cfg_; }

private:
  LlmEndpointConfig cfg_;
  std::shared_ptr<std::counting_semaphore<>> slots_;
};

// Calls {base_url}/embeddings and L2-normalizes the first returned vector.
class RemoteEmbedder final : public EmbeddingProvider {
public:
  explicit RemoteEmbedder(LlmEndpointConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  std::vector<double> embed(const std::string& text) const override {
    if (normalize_text(text).empty()) throw ContractError("embed: text is empty");
    const nlohmann::json body = {{"model", cfg_.model_name}, {"input", text}};
    const auto reply = detail::post_json_with_retry(cfg_, "/embeddings", body);
    std::vector<double> v;
    try {
      v = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("embeddings: response has no data[0].embedding array");
    }
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    if (v.empty() || n2 == 0.0 || !std::isfinite(n2)) throw ProtocolError("embeddings: degenerate vector");
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : v) x *= inv;
    return v;
  }

private:
  LlmEndpointConfig cfg_;
};

}  // namespace trllm
