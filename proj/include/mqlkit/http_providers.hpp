#pragma once

#include <cstdlib>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "mqlkit/chat.hpp"
#include "mqlkit/embedding.hpp"
#include "mqlkit/errors.hpp"

namespace mqlkit {

struct HttpEmbedderConfig {
  std::string base_url;
  std::string path = "/v1/embeddings";
  std::string model;
  std::size_t dimension = 0;
  std::string api_key_env = "EMBEDDING_API_KEY";
  std::size_t batch_size = 64;
  int timeout_seconds = 60;
};

namespace detail {

inline std::string bearer_from_env(const std::string& env_name) {
  if (env_name.empty()) return "";
  const char* v = std::getenv(env_name.c_str());
  return v ? std::string(v) : std::string();
}

inline std::string post_json(const std::string& base_url, const std::string& path,
                             const std::string& body, const std::string& api_key,
                             int timeout_seconds) {
  httplib::Client client(base_url);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  auto res = client.Post(path, headers, body, "application/json");
  if (!res)
    throw ProviderError(0, "transport failure posting to " + base_url + path +
                               ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw ProviderError(res->status, "request to " + base_url + path +
                                         " failed: " + res->body);
  return res->body;
}

}  // namespace detail

/// Talks to an OpenAI style /v1/embeddings endpoint. The API key is read
/// from the environment on every request so the value never has to live in
/// any config file.
class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(HttpEmbedderConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw Error("HttpEmbedder: base_url is required");
    if (config_.model.empty()) throw Error("HttpEmbedder: model is required");
    if (config_.batch_size == 0) throw Error("HttpEmbedder: batch_size must be positive");
  }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    const std::string api_key = detail::bearer_from_env(config_.api_key_env);
    for (std::size_t start = 0; start < texts.size(); start += config_.batch_size) {
      const std::size_t stop = std::min(texts.size(), start + config_.batch_size);
      nlohmann::ordered_json request;
      request["model"] = config_.model;
      request["input"] = nlohmann::ordered_json::array();
      for (std::size_t i = start; i < stop; ++i) request["input"].push_back(texts[i]);
      const std::string body = detail::post_json(
          config_.base_url, config_.path, request.dump(), api_key,
          config_.timeout_seconds);
      std::vector<std::vector<double>> batch =
          parse_embedding_response(body, stop - start, config_.dimension);
      if (config_.dimension == 0 && !batch.empty())
        config_.dimension = batch.front().size();
      for (auto& v : batch) out.push_back(std::move(v));
    }
    return out;
  }

  std::size_t dimension() const override { return config_.dimension; }

  std::string provider_tag() const override {
    return "http:" + config_.model + ":d=" + std::to_string(config_.dimension);
  }

 private:
  HttpEmbedderConfig config_;
};

struct HttpChatClientConfig {
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  double temperature = 0.0;
  std::string api_key_env = "CHAT_API_KEY";
  int timeout_seconds = 120;
};

/// Talks to an OpenAI style /v1/chat/completions endpoint.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpChatClientConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw Error("HttpChatClient: base_url is required");
    if (config_.model.empty()) throw Error("HttpChatClient: model is required");
  }

  std::string complete(const std::vector<ChatMessage>& messages,
                       const std::string& tag) override {
    (void)tag;
    nlohmann::ordered_json request;
    request["model"] = config_.model;
    request["temperature"] = config_.temperature;
    request["messages"] = nlohmann::ordered_json::array();
    for (const ChatMessage& m : messages)
      request["messages"].push_back({{"role", m.role}, {"content", m.content}});
    const std::string body = detail::post_json(
        config_.base_url, config_.path, request.dump(),
        detail::bearer_from_env(config_.api_key_env), config_.timeout_seconds);
    nlohmann::json parsed = nlohmann::json::parse(body, nullptr, false);
    if (parsed.is_discarded())
      throw ProviderError(0, "chat response is not valid JSON");
    if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty())
      throw ProviderError(0, "chat response has no choices");
    const nlohmann::json& msg = parsed["choices"][0];
    if (!msg.contains("message") || !msg["message"].contains("content") ||
        !msg["message"]["content"].is_string())
      throw ProviderError(0, "chat response choice has no message content");
    return msg["message"]["content"].get<std::string>();
  }

  std::string model_name() const override { return config_.model; }

 private:
  HttpChatClientConfig config_;
};

}  // namespace mqlkit
