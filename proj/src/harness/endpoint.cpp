#include "diagcap/harness/endpoint.hpp"

#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <openssl/evp.h>

#include "diagcap/diagram.hpp"

namespace diagcap::harness {

namespace {

constexpr std::string_view kSvgDataPrefix = "data:image/svg+xml;base64,";

std::string api_key_from_env() {
  const char* v = std::getenv(kApiKeyEnv);
  return v ? std::string(v) : std::string();
}

}  // namespace

void EndpointConfig::check() const {
  if (base_url.empty()) throw Error("endpoint: base_url is empty");
  if (max_in_flight < 1) throw Error("endpoint: max_in_flight must be at least 1");
  if (!(timeout_seconds > 0)) throw Error("endpoint: timeout_seconds must be positive");
  if (retries < 0) throw Error("endpoint: retries must not be negative");
  if (backoff_initial_seconds < 0) throw Error("endpoint: backoff_seconds must not be negative");
}

EndpointConfig EndpointConfig::from_keys(const KeyValues& kv) {
  EndpointConfig cfg;
  if (kv.has("api_key")) throw Error(kv.origin() + ": api_key is read from $" + kApiKeyEnv + ", not from files");
  cfg.base_url = kv.get_string("base_url", "");
  cfg.model_name = kv.get_string("model", cfg.model_name);
  cfg.timeout_seconds = kv.get_double("timeout_seconds", cfg.timeout_seconds);
  cfg.max_in_flight = static_cast<int>(kv.get_int("max_in_flight", cfg.max_in_flight));
  cfg.retries = static_cast<int>(kv.get_int("retries", cfg.retries));
  cfg.backoff_initial_seconds = kv.get_double("backoff_seconds", cfg.backoff_initial_seconds);
  kv.reject_unused();
  cfg.api_key = api_key_from_env();
  try {
    cfg.check();
  } catch (const Error& e) {
    throw Error(kv.origin() + ": " + e.what());
  }
  return cfg;
}

EndpointConfig EndpointConfig::resolve(const std::string& spec) {
  if (spec.starts_with("http://") || spec.starts_with("https://")) {
    EndpointConfig cfg;
    cfg.base_url = spec;
    cfg.api_key = api_key_from_env();
    cfg.check();
    return cfg;
  }
  return from_keys(KeyValues::load(spec));
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error("base64: length is not a multiple of 4");
  // EVP_DecodeBlock skips surrounding whitespace and keeps padding bytes; be strict.
  if (text.find_first_of(" \t\r\n") != std::string_view::npos) throw Error("base64: invalid character");
  std::string out(text.size() / 4 * 3, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw Error("base64: invalid character");
  const auto first_pad = text.find('=');
  const std::size_t pad = first_pad == std::string_view::npos ? 0 : text.size() - first_pad;
  if (pad > 2 || text.find_first_not_of('=', first_pad) != std::string_view::npos)
    throw Error("base64: data after padding");
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

nlohmann::json chat_request(const std::string& model, const std::string& prompt, std::string_view svg) {
  nlohmann::json content = nlohmann::json::array();
  content.push_back({{"type", "text"}, {"text", prompt}});
  if (!svg.empty())
    content.push_back(
        {{"type", "image_url"}, {"image_url", {{"url", std::string(kSvgDataPrefix) + base64_encode(svg)}}}});
  return {{"model", model},
          {"temperature", 0},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", std::move(content)}}})}};
}

std::string chat_response_text(const nlohmann::json& response) {
  try {
    return response.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed chat completion response: ") + e.what());
  }
}

ChatParts parse_chat_request(const nlohmann::json& request) {
  ChatParts parts;
  for (const auto& msg : request.at("messages")) {
    const auto& content = msg.at("content");
    if (content.is_string()) {
      parts.prompt += content.get<std::string>();
      continue;
    }
    for (const auto& c : content) {
      const auto type = c.at("type").get<std::string>();
      if (type == "text") {
        parts.prompt += c.at("text").get<std::string>();
      } else if (type == "image_url") {
        const auto url = c.at("image_url").at("url").get<std::string>();
        if (url.starts_with(kSvgDataPrefix)) parts.svg = base64_decode(std::string_view(url).substr(kSvgDataPrefix.size()));
      }
    }
  }
  return parts;
}

HttpEndpoint::HttpEndpoint(EndpointConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.check();
  const auto scheme_end = cfg_.base_url.find("://");
  if (scheme_end == std::string::npos) throw Error("endpoint: base_url needs a scheme: " + cfg_.base_url);
  const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
  scheme_host_port_ = cfg_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : cfg_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string HttpEndpoint::complete(const std::string& prompt, std::string_view svg) {
  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::duration<double>(cfg_.timeout_seconds);
  const auto sec = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  client.set_connection_timeout(sec);
  client.set_read_timeout(sec);
  client.set_write_timeout(sec);
  if (!cfg_.api_key.empty()) client.set_bearer_token_auth(cfg_.api_key);

  const std::string body = chat_request(cfg_.model_name, prompt, svg).dump();
  auto res = client.Post(path_prefix_ + "/v1/chat/completions", body, "application/json");
  if (!res) throw Error("request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("response is not JSON: ") + e.what());
  }
  return chat_response_text(parsed);
}

std::chrono::milliseconds backoff_delay(double initial_seconds, int attempt) {
  const double s = initial_seconds * std::pow(2.0, attempt - 1);
  return std::chrono::milliseconds(static_cast<long long>(std::llround(s * 1000)));
}

}  // namespace diagcap::harness
