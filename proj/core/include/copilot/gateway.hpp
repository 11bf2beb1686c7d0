#pragma once

// Uniform access to chat-completion backends: remote HTTP endpoints speaking
// the chat-completions JSON protocol, and scripted backends that replay canned
// responses for deterministic tests.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace copilot {

enum class Role { system, user, assistant };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

struct ChatMessage {
  Role role = Role::user;
  std::string content;
};

/// Metadata key naming the pipeline stage ("classify", "inquiry", ...).
inline constexpr std::string_view kStageKey = "stage";
inline constexpr std::string_view kSessionKey = "session";

struct CompletionRequest {
  std::vector<ChatMessage> messages;
  std::string model_id;
  double temperature = 0.7;
  int max_tokens = 1024;
  std::map<std::string, std::string> metadata;

  /// Throws PreconditionError on an empty message list, a non-finite or
  /// out-of-range temperature, max_tokens < 1, or empty non-system content.
  void validate() const;

  std::string stage() const;

  /// Content of the last user message, or empty when there is none.
  std::string_view last_user_message() const;

  /// Single user-message request tagged with `stage`.
  static CompletionRequest prompt(std::string stage, std::string text, double temperature);
};

enum class FinishReason { stop, length, error };

std::string_view to_string(FinishReason f);

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct CompletionResult {
  std::string content;
  FinishReason finish_reason = FinishReason::stop;
  std::int64_t latency_ms = 0;
  TokenUsage usage;
};

/// A chat-completion endpoint. Implementations throw TransportError or
/// AuthError; retries and transcript capture happen in LlmClient.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResult send(const CompletionRequest& req) = 0;
  virtual std::string name() const = 0;
};

using BackendHandle = std::shared_ptr<Backend>;

// --- scripted backend --------------------------------------------------------

struct ScriptRule {
  enum class Match { exact, substring };

  Match match = Match::substring;
  std::string pattern;
  /// When set, the rule only applies to requests tagged with this stage.
  std::optional<std::string> stage;
  std::string response;
  /// When set, the rule is skipped after it has fired this many times.
  std::optional<int> max_uses;
};

/// Replays the response of the first rule whose matcher accepts the last user
/// message. Throws UnscriptedRequest when nothing matches. Identical request
/// sequences produce identical response sequences.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(std::vector<ScriptRule> rules, std::string name = "scripted");

  CompletionResult send(const CompletionRequest& req) override;
  std::string name() const override { return name_; }

  /// Number of requests answered so far.
  std::size_t calls() const;

 private:
  std::string name_;
  std::vector<ScriptRule> rules_;
  std::vector<int> uses_;
  std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

BackendHandle make_scripted_backend(std::vector<ScriptRule> rules);

/// Loads a JSON array of `{"match": "exact"|"substring", "pattern": ...,
/// "response": ..., "stage"?: ..., "max_uses"?: n}` objects.
std::vector<ScriptRule> load_script(const std::filesystem::path& path);
std::vector<ScriptRule> parse_script(const nlohmann::json& doc);

/// Backend driven by a callable; handy for echo backends and fault injection.
class FunctionBackend final : public Backend {
 public:
  using Fn = std::function<CompletionResult(const CompletionRequest&)>;
  explicit FunctionBackend(Fn fn, std::string name = "function");
  CompletionResult send(const CompletionRequest& req) override;
  std::string name() const override { return name_; }

 private:
  Fn fn_;
  std::string name_;
};

/// Backend whose reply is computed from the request; finish_reason=stop.
BackendHandle make_function_backend(std::function<std::string(const CompletionRequest&)> fn,
                                    std::string name = "function");

// --- remote backend ----------------------------------------------------------

struct HttpBackendConfig {
  /// Base URL up to and including the API version, e.g. `https://host/v1`.
  /// Requests go to `<base_url>/chat/completions`.
  std::string base_url;
  std::string api_key;
  std::string model;
  std::chrono::milliseconds timeout{60000};
};

BackendHandle make_http_backend(HttpBackendConfig cfg);

// --- transcript --------------------------------------------------------------

struct TranscriptEntry {
  std::string stage;
  CompletionRequest request;
  CompletionResult result;
  /// Set when the call failed; `result` is then a synthesized error result.
  std::optional<std::string> error;
};

/// Append-only log of gateway calls. Thread-safe.
class Transcript {
 public:
  void append(TranscriptEntry e);
  std::vector<TranscriptEntry> entries() const;
  std::size_t size() const;
  std::size_t count_stage(std::string_view stage) const;
  std::vector<std::string> stages() const;

 private:
  mutable std::mutex mu_;
  std::vector<TranscriptEntry> entries_;
};

// --- client ------------------------------------------------------------------

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds base_backoff{250};
};

/// Sends requests through a backend with validation, retry on transient
/// transport failures (exponential backoff), and transcript capture.
class LlmClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit LlmClient(BackendHandle backend, RetryPolicy retry = {}, std::string model_id = {});

  /// Every call appends exactly one entry to `transcript` (when given), even
  /// when it fails.
  CompletionResult complete(CompletionRequest req, Transcript* transcript = nullptr) const;

  /// Single-prompt shorthand; returns the content.
  std::string ask(std::string stage, std::string prompt, double temperature,
                  Transcript* transcript = nullptr) const;

  void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }
  const BackendHandle& backend() const { return backend_; }
  const RetryPolicy& retry_policy() const { return retry_; }

 private:
  BackendHandle backend_;
  RetryPolicy retry_;
  std::string model_id_;
  Sleeper sleeper_;
};

}  // namespace copilot
