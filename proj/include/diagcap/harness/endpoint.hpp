#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "diagcap/config.hpp"

namespace diagcap::harness {

inline constexpr const char* kApiKeyEnv = "DIAGCAP_API_KEY";

struct EndpointConfig {
  std::string base_url;  // scheme://host[:port][/prefix]; requests go to <base_url>/v1/chat/completions
  std::string api_key;   // only ever read from the environment
  std::string model_name = "default";
  double timeout_seconds = 120;
  int max_in_flight = 4;
  int retries = 3;
  double backoff_initial_seconds = 0.5;

  /// Throws Error unless max_in_flight >= 1, timeout > 0, retries >= 0.
  void check() const;

  /// Keys: base_url, model, timeout_seconds, max_in_flight, retries,
  /// backoff_seconds. The API key is taken from the environment.
  static EndpointConfig from_keys(const KeyValues& kv);
  /// `spec` is either an http(s) URL or the path of an endpoint config file.
  static EndpointConfig resolve(const std::string& spec);
};

std::string base64_encode(std::string_view bytes);
/// Throws Error on malformed input.
std::string base64_decode(std::string_view text);

/// OpenAI-style chat completion request: one user message carrying the
/// prompt text and the SVG as a data URL; temperature 0.
nlohmann::json chat_request(const std::string& model, const std::string& prompt, std::string_view svg);

/// choices[0].message.content; throws Error if absent.
std::string chat_response_text(const nlohmann::json& response);

/// Request pieces a server sees, recovered from a chat_request body.
struct ChatParts {
  std::string prompt;
  std::string svg;  // empty if no image was attached
};
ChatParts parse_chat_request(const nlohmann::json& request);

/// One model call; throws on any failure. Implementations must be callable
/// concurrently from several threads.
class ModelEndpoint {
 public:
  virtual ~ModelEndpoint() = default;
  virtual std::string complete(const std::string& prompt, std::string_view svg) = 0;
};

/// HTTP(S) client for an OpenAI-compatible server. Each call opens its own
/// connection, so calls are independent.
class HttpEndpoint : public ModelEndpoint {
 public:
  explicit HttpEndpoint(EndpointConfig cfg);
  std::string complete(const std::string& prompt, std::string_view svg) override;

 private:
  EndpointConfig cfg_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

/// Delay before retry `attempt` (1-based): initial * 2^(attempt-1).
std::chrono::milliseconds backoff_delay(double initial_seconds, int attempt);

}  // namespace diagcap::harness
