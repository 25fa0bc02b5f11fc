#pragma once

#include <cstdlib>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "aps/embed.hpp"
#include "aps/gateway.hpp"

namespace aps {

/// OpenAI-compatible endpoint. The auth token is read from the environment
/// variable named by `api_key_env`; it is never stored in configs.
struct EndpointConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-3.5-turbo-0613";
  std::string embedding_model = "text-embedding-3-small";
  std::string api_key_env = "APS_API_KEY";
  int timeout_seconds = 120;

  std::string api_key() const {
    const char* v = api_key_env.empty() ? nullptr : std::getenv(api_key_env.c_str());
    return v ? v : "";
  }
};

namespace detail {

struct SplitUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

inline SplitUrl split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorKind::Config, "base URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out{url.substr(0, path_start), path_start == std::string::npos ? "" : url.substr(path_start)};
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

class JsonPoster {
 public:
  explicit JsonPoster(const EndpointConfig& cfg) : cfg_(cfg), url_(split_base_url(cfg.base_url)) {}

  // POST and parse; 429/5xx/connection problems are transient.
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
    httplib::Client client(url_.scheme_host_port);
    client.set_connection_timeout(cfg_.timeout_seconds);
    client.set_read_timeout(cfg_.timeout_seconds);
    httplib::Headers headers;
    if (const auto key = cfg_.api_key(); !key.empty()) headers.emplace("Authorization", "Bearer " + key);
    const auto res = client.Post(url_.path_prefix + path, headers, body.dump(), "application/json");
    if (!res) throw TransientFailure("transport failure: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
      throw TransientFailure("HTTP " + std::to_string(res->status));
    if (res->status != 200)
      throw Error(ErrorKind::Gateway, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorKind::Protocol, "response body is not JSON");
    }
  }

 private:
  EndpointConfig cfg_;
  SplitUrl url_;
};

}  // namespace detail

/// Chat completions over the OpenAI wire format.
class RemoteChatBackend final : public ChatBackend {
 public:
  explicit RemoteChatBackend(EndpointConfig cfg) : cfg_(std::move(cfg)), poster_(cfg_) {}

  std::string id() const override { return "remote/" + cfg_.model; }

  static nlohmann::json request_body(const std::string& model, const ChatRequest& request) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : request.messages)
      messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    return {{"model", model},
            {"messages", messages},
            {"temperature", request.params.temperature},
            {"top_p", request.params.top_p},
            {"max_tokens", request.params.max_tokens}};
  }

  static std::string parse_response(const nlohmann::json& body) {
    try {
      const auto& content = body.at("choices").at(0).at("message").at("content");
      if (!content.is_string()) throw Error(ErrorKind::Protocol, "message content is not a string");
      return content.get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::Protocol, "response lacks choices[0].message.content");
    }
  }

  std::string complete(const ChatRequest& request) override {
    return parse_response(poster_.post("/chat/completions", request_body(cfg_.model, request)));
  }

 private:
  EndpointConfig cfg_;
  detail::JsonPoster poster_;
};

/// Embeddings over the OpenAI wire format, with the same retry contract as
/// the chat gateway (the ledger only counts chat completions).
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit RemoteEmbeddingProvider(EndpointConfig cfg, RetryPolicy retry = {}, std::size_t batch = 64)
      : cfg_(std::move(cfg)), poster_(cfg_), retry_(retry), batch_(std::max<std::size_t>(batch, 1)) {}

  std::string id() const override { return "remote-embedding/" + cfg_.embedding_model; }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += batch_) {
      const auto chunk = texts.subspan(start, std::min(batch_, texts.size() - start));
      auto vectors = embed_chunk(chunk);
      for (auto& v : vectors) out.push_back(std::move(v));
    }
    return out;
  }

 private:
  std::vector<EmbeddingVector> embed_chunk(std::span<const std::string> texts) {
    const nlohmann::json body{{"model", cfg_.embedding_model},
                              {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    std::string last;
    const std::size_t attempts = std::max<std::size_t>(retry_.max_attempts, 1);
    for (std::size_t attempt = 1; attempt <= attempts; ++attempt) {
      if (attempt > 1) std::this_thread::sleep_for(retry_.delay_before(attempt - 1));
      try {
        return parse(poster_.post("/embeddings", body), texts.size());
      } catch (const TransientFailure& e) {
        last = e.what();
      }
    }
    throw Error(ErrorKind::Gateway, "stage embed failed after " + std::to_string(attempts) + " attempts: " + last);
  }

  static std::vector<EmbeddingVector> parse(const nlohmann::json& body, std::size_t expected) {
    std::vector<EmbeddingVector> out(expected);
    try {
      const auto& data = body.at("data");
      if (!data.is_array() || data.size() != expected)
        throw Error(ErrorKind::ProviderContract, "embedding response has the wrong number of vectors");
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t index = data[i].contains("index") ? data[i].at("index").get<std::size_t>() : i;
        if (index >= expected) throw Error(ErrorKind::ProviderContract, "embedding index out of range");
        out[index].values = data[i].at("embedding").get<std::vector<double>>();
      }
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::Protocol, "response lacks data[].embedding");
    }
    return out;
  }

  EndpointConfig cfg_;
  detail::JsonPoster poster_;
  RetryPolicy retry_;
  std::size_t batch_;
};

}  // namespace aps
