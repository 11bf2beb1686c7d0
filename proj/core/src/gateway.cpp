#include "copilot/gateway.hpp"

#include <cmath>
#include <fstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "copilot/errors.hpp"

namespace copilot {

using json = nlohmann::json;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  throw PreconditionError("unknown chat role: " + std::string(s));
}

std::string_view to_string(FinishReason f) {
  switch (f) {
    case FinishReason::stop: return "stop";
    case FinishReason::length: return "length";
    case FinishReason::error: return "error";
  }
  return "error";
}

void CompletionRequest::validate() const {
  if (messages.empty()) throw PreconditionError("completion request has no messages");
  if (!std::isfinite(temperature) || temperature < 0.0 || temperature > 2.0) {
    throw PreconditionError("temperature must be finite and within [0, 2]");
  }
  if (max_tokens < 1) throw PreconditionError("max_tokens must be >= 1");
  for (const auto& m : messages) {
    if (m.role != Role::system && m.content.empty()) {
      throw PreconditionError("empty content in a non-system message");
    }
  }
}

std::string CompletionRequest::stage() const {
  auto it = metadata.find(std::string(kStageKey));
  return it == metadata.end() ? std::string{} : it->second;
}

std::string_view CompletionRequest::last_user_message() const {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::user) return it->content;
  }
  return {};
}

CompletionRequest CompletionRequest::prompt(std::string stage, std::string text,
                                            double temperature) {
  CompletionRequest req;
  req.messages.push_back({Role::user, std::move(text)});
  req.temperature = temperature;
  req.metadata.emplace(std::string(kStageKey), std::move(stage));
  return req;
}

// --- scripted ----------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules, std::string name)
    : name_(std::move(name)), rules_(std::move(rules)), uses_(rules_.size(), 0) {}

CompletionResult ScriptedBackend::send(const CompletionRequest& req) {
  const auto last = req.last_user_message();
  const auto stage = req.stage();
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& rule = rules_[i];
    if (rule.stage && *rule.stage != stage) continue;
    if (rule.max_uses && uses_[i] >= *rule.max_uses) continue;
    const bool hit = rule.match == ScriptRule::Match::exact
                         ? last == rule.pattern
                         : last.find(rule.pattern) != std::string_view::npos;
    if (!hit) continue;
    ++uses_[i];
    ++calls_;
    CompletionResult r;
    r.content = rule.response;
    r.finish_reason = FinishReason::stop;
    r.usage.prompt_tokens = static_cast<std::int64_t>(last.size() / 4);
    r.usage.completion_tokens = static_cast<std::int64_t>(rule.response.size() / 4);
    return r;
  }
  std::string excerpt(last.substr(0, 120));
  throw UnscriptedRequest("no script rule matches request (stage '" + stage + "'): " + excerpt);
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

BackendHandle make_scripted_backend(std::vector<ScriptRule> rules) {
  return std::make_shared<ScriptedBackend>(std::move(rules));
}

std::vector<ScriptRule> parse_script(const json& doc) {
  if (!doc.is_array()) throw ConfigError("script must be a JSON array of rules");
  std::vector<ScriptRule> rules;
  for (const auto& item : doc) {
    ScriptRule rule;
    const auto kind = item.value("match", std::string("substring"));
    if (kind == "exact") {
      rule.match = ScriptRule::Match::exact;
    } else if (kind == "substring") {
      rule.match = ScriptRule::Match::substring;
    } else {
      throw ConfigError("unknown script matcher '" + kind + "'");
    }
    try {
      rule.pattern = item.at("pattern").get<std::string>();
      rule.response = item.at("response").get<std::string>();
      if (item.contains("stage")) rule.stage = item["stage"].get<std::string>();
      if (item.contains("max_uses")) rule.max_uses = item["max_uses"].get<int>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad script rule: ") + e.what());
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<ScriptRule> load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open script file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("script file " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    return parse_script(doc);
  } catch (const json::exception& e) {
    throw ConfigError("bad rule in " + path.string() + ": " + e.what());
  }
}

// --- function ----------------------------------------------------------------

FunctionBackend::FunctionBackend(Fn fn, std::string name)
    : fn_(std::move(fn)), name_(std::move(name)) {}

CompletionResult FunctionBackend::send(const CompletionRequest& req) { return fn_(req); }

BackendHandle make_function_backend(std::function<std::string(const CompletionRequest&)> fn,
                                    std::string name) {
  return std::make_shared<FunctionBackend>(
      [fn = std::move(fn)](const CompletionRequest& req) {
        CompletionResult r;
        r.content = fn(req);
        return r;
      },
      std::move(name));
}

// --- transcript --------------------------------------------------------------

void Transcript::append(TranscriptEntry e) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(e));
}

std::vector<TranscriptEntry> Transcript::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t Transcript::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::size_t Transcript::count_stage(std::string_view stage) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.stage == stage ? 1 : 0;
  return n;
}

std::vector<std::string> Transcript::stages() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.stage);
  return out;
}

// --- client ------------------------------------------------------------------

LlmClient::LlmClient(BackendHandle backend, RetryPolicy retry, std::string model_id)
    : backend_(std::move(backend)),
      retry_(retry),
      model_id_(std::move(model_id)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  if (!backend_) throw PreconditionError("LlmClient needs a backend");
}

CompletionResult LlmClient::complete(CompletionRequest req, Transcript* transcript) const {
  req.validate();
  if (req.model_id.empty()) req.model_id = model_id_;

  const auto stage = req.stage();
  const auto record_failure = [&](const std::exception& e) {
    if (!transcript) return;
    CompletionResult failed;
    failed.finish_reason = FinishReason::error;
    transcript->append({stage, req, failed, std::string(e.what())});
  };

  int attempt = 0;
  for (;;) {
    const auto started = std::chrono::steady_clock::now();
    try {
      auto result = backend_->send(req);
      result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - started)
                              .count();
      if (result.content.empty() && result.finish_reason == FinishReason::error) {
        throw BackendRefusal("backend " + backend_->name() + " refused the request (stage '" +
                             stage + "')");
      }
      if (transcript) transcript->append({stage, req, result, std::nullopt});
      return result;
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= retry_.max_retries) {
        record_failure(e);
        throw;
      }
      const auto delay = retry_.base_backoff * (1 << attempt);
      spdlog::warn("transient backend failure (attempt {}): {}; retrying in {} ms", attempt + 1,
                   e.what(), delay.count());
      ++attempt;
      sleeper_(delay);
    } catch (const std::exception& e) {
      record_failure(e);
      throw;
    }
  }
}

std::string LlmClient::ask(std::string stage, std::string prompt, double temperature,
                           Transcript* transcript) const {
  return complete(CompletionRequest::prompt(std::move(stage), std::move(prompt), temperature),
                  transcript)
      .content;
}

}  // namespace copilot
