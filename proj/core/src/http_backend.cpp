#include <httplib.h>

#include <chrono>

#include "copilot/errors.hpp"
#include "copilot/gateway.hpp"
#include "url.hpp"

namespace copilot {

using json = nlohmann::json;

namespace {

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)), url_(split_url(cfg_.base_url)) {
    if (url_.origin.empty()) throw ConfigError("backend base_url is empty");
  }

  std::string name() const override { return "http:" + cfg_.model; }

  CompletionResult send(const CompletionRequest& req) override {
    json body;
    body["model"] = req.model_id.empty() ? cfg_.model : req.model_id;
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;
    body["messages"] = json::array();
    for (const auto& m : req.messages) {
      body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }

    httplib::Client cli(url_.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    if (!cfg_.api_key.empty()) cli.set_bearer_token_auth(cfg_.api_key);

    auto res = cli.Post(url_.path + "/chat/completions", body.dump(), "application/json");
    if (!res) {
      throw TransportError("transport failure talking to " + url_.origin + ": " +
                               httplib::to_string(res.error()),
                           0, true);
    }
    if (res->status == 401 || res->status == 403) {
      throw AuthError("backend rejected credentials (HTTP " + std::to_string(res->status) + ")",
                      res->status);
    }
    if (res->status >= 500) {
      throw TransportError("backend HTTP " + std::to_string(res->status), res->status, true);
    }
    if (res->status >= 400) {
      throw TransportError("backend HTTP " + std::to_string(res->status) + ": " + res->body,
                           res->status, false);
    }

    CompletionResult out;
    try {
      const auto doc = json::parse(res->body);
      const auto& choice = doc.at("choices").at(0);
      const auto& content = choice.at("message").at("content");
      out.content = content.is_string() ? content.get<std::string>() : std::string{};
      const auto reason = choice.value("finish_reason", std::string("stop"));
      out.finish_reason = reason == "length"  ? FinishReason::length
                          : reason == "stop"  ? FinishReason::stop
                                              : (out.content.empty() ? FinishReason::error
                                                                     : FinishReason::stop);
      if (doc.contains("usage")) {
        out.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
        out.usage.completion_tokens = doc["usage"].value("completion_tokens", 0);
      }
    } catch (const json::exception& e) {
      throw TransportError(std::string("malformed chat-completions response: ") + e.what(),
                           res->status, false);
    }
    if (out.content.empty()) out.finish_reason = FinishReason::error;
    return out;
  }

 private:
  HttpBackendConfig cfg_;
  UrlParts url_;
};

}  // namespace

BackendHandle make_http_backend(HttpBackendConfig cfg) {
  return std::make_shared<HttpBackend>(std::move(cfg));
}

}  // namespace copilot
