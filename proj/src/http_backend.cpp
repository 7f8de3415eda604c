#include <chrono>
#include <cstdlib>

#include <httplib.h>

#include "pairforge/gateway.hpp"

namespace pairforge {

struct HttpBackend::Impl {
  std::string base_url;
  std::string model;
  std::string api_key;
  httplib::Client client;

  Impl(std::string url, std::string model_name, std::string key, int timeout_ms)
      : base_url(std::move(url)),
        model(std::move(model_name)),
        api_key(std::move(key)),
        client(base_url) {
    client.set_connection_timeout(std::chrono::milliseconds(timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(timeout_ms));
    client.set_write_timeout(std::chrono::milliseconds(timeout_ms));
  }
};

HttpBackend::HttpBackend(std::string base_url, std::string model,
                         std::string api_key_env, int timeout_ms) {
  std::string key;
  if (!api_key_env.empty()) {
    if (const char* value = std::getenv(api_key_env.c_str())) {
      key = value;
    }
  }
  impl_ = std::make_unique<Impl>(std::move(base_url), std::move(model),
                                 std::move(key), timeout_ms);
}

HttpBackend::~HttpBackend() = default;

CompletionResult HttpBackend::complete_once(const CompletionRequest& req) {
  Json body;
  body["model"] = impl_->model;
  Json messages = Json::array();
  if (req.system) {
    messages.push_back({{"role", "system"}, {"content", *req.system}});
  }
  messages.push_back({{"role", "user"}, {"content", req.user}});
  body["messages"] = std::move(messages);
  body["temperature"] = req.temperature;
  body["top_p"] = req.top_p;
  body["n"] = req.n;
  if (req.max_tokens) {
    body["max_tokens"] = *req.max_tokens;
  }
  if (req.seed) {
    body["seed"] = *req.seed;
  }

  httplib::Headers headers = {{"Content-Type", "application/json"}};
  if (!impl_->api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + impl_->api_key);
  }

  const std::string digest = req.digest();
  auto result = impl_->client.Post("/v1/chat/completions", headers, body.dump(),
                                   "application/json");
  if (!result) {
    throw TransientError("transport error: " + httplib::to_string(result.error()),
                         digest);
  }
  if (result->status == 429 || result->status >= 500) {
    throw TransientError("HTTP " + std::to_string(result->status), digest);
  }
  if (result->status != 200) {
    throw GatewayError("HTTP " + std::to_string(result->status) + ": " +
                           result->body,
                       digest);
  }

  Json parsed = Json::parse(result->body, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("choices") ||
      !parsed["choices"].is_array()) {
    throw ProtocolError("malformed chat-completion response", digest);
  }
  CompletionResult out;
  out.backend_id = id();
  for (const Json& choice : parsed["choices"]) {
    if (!choice.contains("message") || !choice["message"].contains("content")) {
      throw ProtocolError("choice without message content", digest);
    }
    out.texts.push_back(choice["message"]["content"].get<std::string>());
  }
  if (parsed.contains("usage") && parsed["usage"].is_object()) {
    TokenUsage usage;
    usage.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
    usage.completion_tokens = parsed["usage"].value("completion_tokens", 0);
    out.usage = usage;
  }
  return out;
}

std::string HttpBackend::id() const {
  return "http:" + impl_->base_url + "#" + impl_->model;
}

}  // namespace pairforge
