#pragma once

// Completion backend for servers speaking the common chat-completions JSON
// format (POST {base}/chat/completions with a bearer token).

#include <mimetic/error.hpp>
#include <mimetic/prompt.hpp>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace mimetic {

struct BackendConfig {
  std::string endpoint = "https://api.openai.com/v1";
  std::string model = "gpt-4";
  double temperature = 0.7;
  int max_tokens = 256;
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
  std::string api_key_env = "OPENAI_API_KEY";
};

inline void validate(const BackendConfig& c) {
  if (c.timeout.count() <= 0) throw ConfigError("backend timeout must be positive");
  if (c.retries < 0) throw ConfigError("backend retries must be >= 0");
  if (c.max_tokens <= 0) throw ConfigError("max_tokens must be positive");
  if (c.initial_backoff.count() < 0 || c.backoff_factor < 1.0) throw ConfigError("bad backoff settings");
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path prefix without trailing slash
};

inline Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must include a scheme: '" + url + "'");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("endpoint scheme must be http or https");
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  e.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  if (e.origin.size() <= scheme_end + 3) throw ConfigError("endpoint has no host: '" + url + "'");
  return e;
}

inline nlohmann::json chat_request_body(const BackendConfig& config, const std::string& prompt) {
  return {{"model", config.model},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
          {"temperature", config.temperature},
          {"max_tokens", config.max_tokens}};
}

/// Extracts choices[0].message.content; throws on any other shape.
inline std::string parse_chat_response(const std::string& body) {
  const auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw std::runtime_error("completion response is not JSON");
  const auto* choices = doc.is_object() && doc.contains("choices") ? &doc["choices"] : nullptr;
  if (!choices || !choices->is_array() || choices->empty()) throw std::runtime_error("completion response has no choices");
  const auto& msg = (*choices)[0];
  if (!msg.contains("message") || !msg["message"].contains("content") || !msg["message"]["content"].is_string())
    throw std::runtime_error("completion response has no message content");
  return msg["message"]["content"].get<std::string>();
}

class ChatCompletionBackend final : public CompletionBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  /// The credential is read from the environment variable named in the
  /// config, once, here.
  explicit ChatCompletionBackend(BackendConfig config, Sleeper sleeper = default_sleeper())
      : config_(std::move(config)), endpoint_(split_endpoint(config_.endpoint)), sleep_(std::move(sleeper)) {
    validate(config_);
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }

  std::string complete(const CompletionRequest& request) override {
    const std::string body = chat_request_body(config_, request.prompt).dump();
    auto delay = config_.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      if (attempt > 0) {
        sleep_(delay);
        delay = std::chrono::milliseconds(static_cast<long long>(delay.count() * config_.backoff_factor));
      }
      httplib::Client client(endpoint_.origin);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
      client.set_connection_timeout(secs.count(), usecs.count());
      client.set_read_timeout(secs.count(), usecs.count());
      client.set_write_timeout(secs.count(), usecs.count());
      httplib::Headers headers;
      if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

      auto res = client.Post(endpoint_.path + "/chat/completions", headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status) + ": " + scrub(res->body.substr(0, 200));
        continue;
      }
      if (res->status != 200)
        throw std::runtime_error("HTTP " + std::to_string(res->status) + ": " + scrub(res->body.substr(0, 200)));
      try {
        return parse_chat_response(res->body);
      } catch (const std::exception& e) {
        throw std::runtime_error(scrub(e.what()));
      }
    }
    throw std::runtime_error("gave up after " + std::to_string(config_.retries + 1) + " attempts; " + last_error);
  }

  std::string name() const override { return "chat:" + config_.model; }

  bool has_credential() const { return !api_key_.empty(); }

  /// Removes every occurrence of the credential from `text`.
  std::string scrub(std::string text) const {
    if (api_key_.empty()) return text;
    for (auto pos = text.find(api_key_); pos != std::string::npos; pos = text.find(api_key_, pos))
      text.replace(pos, api_key_.size(), "[redacted]");
    return text;
  }

  static Sleeper default_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }

 private:
  BackendConfig config_;
  Endpoint endpoint_;
  Sleeper sleep_;
  std::string api_key_;
};

}  // namespace mimetic
