#pragma once

// Service and campaign configuration. A single JSON file; secrets and a few
// deployment settings can be overridden from the environment.

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "copilot/campaign.hpp"
#include "copilot/dialogue.hpp"
#include "copilot/gateway.hpp"
#include "copilot/memory.hpp"
#include "copilot/report.hpp"

namespace copilot {

struct BackendConfig {
  enum class Kind { http, scripted };
  Kind kind = Kind::scripted;
  /// http: base URL up to the API version.
  std::string endpoint;
  std::string model;
  /// Name of the environment variable holding the API key.
  std::string api_key_env;
  std::string api_key;
  /// scripted: JSON rule file.
  std::filesystem::path script;
  std::chrono::milliseconds timeout{60000};
};

struct SearchConfig {
  enum class Kind { null_provider, http };
  Kind kind = Kind::null_provider;
  std::string endpoint;
  std::string api_key_env;
  std::string api_key;
  std::size_t top_k = 3;
  std::size_t byte_budget = 2000;
  std::chrono::milliseconds timeout{3000};
};

struct DoctorConfig {
  /// New sessions hold answers for doctor review.
  bool attached = false;
  /// Open review items older than this are approved automatically.
  std::optional<std::chrono::seconds> auto_approve_after;
  /// Static token required on review endpoints when non-empty.
  std::string token;
  std::string token_env;
};

struct SystemConfig {
  std::string name;
  /// "copilot" or "bare".
  std::string agent = "copilot";
  /// Backend role used by the agent.
  std::string backend = "copilot";
  EngineConfig engine;
};

struct ServiceConfig {
  /// Keyed by role: "copilot", "judge", "patient" (others allowed).
  std::map<std::string, BackendConfig> backends;
  EngineConfig engine;
  RetentionPolicy retention;
  DoctorConfig doctor;
  SearchConfig search;
  RetryPolicy retry;
  HeadingMode report_headings = HeadingMode::strict;
  std::filesystem::path data_dir = "data";
  std::string host = "127.0.0.1";
  int port = 8080;

  CampaignConfig campaign;
  std::vector<SystemConfig> systems;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// The process environment.
std::optional<std::string> process_env(const std::string& name);

/// Parses a configuration document. Relative paths resolve against
/// `base_dir`. Throws ConfigError.
ServiceConfig parse_config(const nlohmann::json& doc,
                           const std::filesystem::path& base_dir = ".");

/// Reads the file, parses it and applies environment overrides.
ServiceConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env);

/// COPILOT_DATA_DIR, COPILOT_PORT, COPILOT_DOCTOR_TOKEN,
/// COPILOT_<ROLE>_ENDPOINT, COPILOT_<ROLE>_MODEL and the variables named by
/// `api_key_env` fields.
void apply_env_overrides(ServiceConfig& cfg, const EnvLookup& env);

/// Throws ConfigError on negative durations or inconsistent settings.
void validate(const ServiceConfig& cfg);

/// Throws ConfigError when the role is not configured or the backend cannot
/// be built.
BackendHandle make_backend(const BackendConfig& cfg);
LlmClient make_client(const ServiceConfig& cfg, const std::string& role);

}  // namespace copilot
