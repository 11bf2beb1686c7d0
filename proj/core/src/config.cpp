#include "copilot/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "copilot/errors.hpp"
#include "text.hpp"

namespace copilot {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::set<std::string, std::less<>> kTopLevelKeys = {
    "backends", "max_inquiry_rounds", "retention", "safety",   "inquiry_enabled",
    "doctor",   "search",             "retry",     "report_headings", "data_dir",
    "host",     "port",               "campaign",  "systems"};

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::chrono::milliseconds millis(const json& j, const char* key, std::chrono::milliseconds dflt) {
  if (!j.contains(key)) return dflt;
  const auto v = j.at(key).get<long long>();
  if (v < 0) throw ConfigError(std::string(key) + " must be non-negative");
  return std::chrono::milliseconds(v);
}

BackendConfig parse_backend(const json& j, const fs::path& base) {
  BackendConfig b;
  const auto kind = j.value("kind", std::string("http"));
  if (kind == "http") {
    b.kind = BackendConfig::Kind::http;
  } else if (kind == "scripted") {
    b.kind = BackendConfig::Kind::scripted;
  } else {
    throw ConfigError("unknown backend kind '" + kind + "'");
  }
  b.endpoint = j.value("endpoint", "");
  b.model = j.value("model", "");
  b.api_key_env = j.value("api_key_env", "");
  b.api_key = j.value("api_key", "");
  b.script = resolve(base, j.value("script", ""));
  b.timeout = millis(j, "timeout_ms", b.timeout);
  return b;
}

void parse_safety(const json& j, EngineConfig& engine) {
  for (const auto& [name, value] : j.items()) {
    auto task = task_from_string(name);
    if (!task) throw ConfigError("unknown task '" + name + "' in safety toggles");
    engine.safety_enabled[*task] = value.get<bool>();
  }
}

std::vector<CriterionId> parse_criteria(const json& j) {
  std::vector<CriterionId> out;
  const auto add = [&](const std::string& name) {
    if (name == "all") {
      out.assign(all_criteria().begin(), all_criteria().end());
      return;
    }
    auto c = criterion_from_string(name);
    if (!c) throw ConfigError("unknown criterion '" + name + "'");
    out.push_back(*c);
  };
  if (j.is_string()) {
    add(j.get<std::string>());
  } else {
    for (const auto& item : j) add(item.get<std::string>());
  }
  return out;
}

std::string env_role(std::string role) {
  for (auto& c : role) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return role;
}

}  // namespace

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

ServiceConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!kTopLevelKeys.contains(key)) throw ConfigError("unknown configuration key '" + key + "'");
  }
  ServiceConfig cfg;
  try {
    if (doc.contains("backends")) {
      for (const auto& [role, b] : doc["backends"].items()) {
        cfg.backends[role] = parse_backend(b, base_dir);
      }
    }
    cfg.engine.max_inquiry_rounds = doc.value("max_inquiry_rounds", cfg.engine.max_inquiry_rounds);
    cfg.engine.inquiry_enabled = doc.value("inquiry_enabled", cfg.engine.inquiry_enabled);
    if (doc.contains("safety")) parse_safety(doc["safety"], cfg.engine);

    if (doc.contains("retention")) {
      const auto& r = doc["retention"];
      cfg.retention.abbreviate_after_months =
          r.value("abbreviate_after_months", cfg.retention.abbreviate_after_months);
      cfg.retention.delete_after_months =
          r.value("delete_after_months", cfg.retention.delete_after_months);
      const auto mode = r.value("month_mode", std::string("fixed_30_days"));
      if (mode == "fixed_30_days") {
        cfg.retention.month_mode = RetentionPolicy::MonthMode::fixed_30_days;
      } else if (mode == "calendar") {
        cfg.retention.month_mode = RetentionPolicy::MonthMode::calendar;
      } else {
        throw ConfigError("unknown month_mode '" + mode + "'");
      }
    }

    if (doc.contains("doctor")) {
      const auto& d = doc["doctor"];
      cfg.doctor.attached = d.value("attached", false);
      if (d.contains("auto_approve_after_s") && !d["auto_approve_after_s"].is_null()) {
        const auto s = d["auto_approve_after_s"].get<long long>();
        if (s < 0) throw ConfigError("auto_approve_after_s must be non-negative");
        cfg.doctor.auto_approve_after = std::chrono::seconds(s);
      }
      cfg.doctor.token = d.value("token", "");
      cfg.doctor.token_env = d.value("token_env", "");
    }

    if (doc.contains("search")) {
      const auto& s = doc["search"];
      const auto kind = s.value("kind", std::string("null"));
      if (kind == "null") {
        cfg.search.kind = SearchConfig::Kind::null_provider;
      } else if (kind == "http") {
        cfg.search.kind = SearchConfig::Kind::http;
      } else {
        throw ConfigError("unknown search provider '" + kind + "'");
      }
      cfg.search.endpoint = s.value("endpoint", "");
      cfg.search.api_key_env = s.value("api_key_env", "");
      cfg.search.api_key = s.value("api_key", "");
      cfg.search.top_k = s.value("top_k", cfg.search.top_k);
      cfg.search.byte_budget = s.value("byte_budget", cfg.search.byte_budget);
      cfg.search.timeout = millis(s, "timeout_ms", cfg.search.timeout);
    }

    if (doc.contains("retry")) {
      const auto& r = doc["retry"];
      cfg.retry.max_retries = r.value("max_retries", cfg.retry.max_retries);
      cfg.retry.base_backoff = millis(r, "base_backoff_ms", cfg.retry.base_backoff);
    }

    const auto headings = doc.value("report_headings", std::string("strict"));
    if (headings == "strict") {
      cfg.report_headings = HeadingMode::strict;
    } else if (headings == "lenient") {
      cfg.report_headings = HeadingMode::lenient;
    } else {
      throw ConfigError("report_headings must be strict or lenient");
    }

    if (doc.contains("data_dir")) cfg.data_dir = resolve(base_dir, doc["data_dir"].get<std::string>());
    cfg.host = doc.value("host", cfg.host);
    cfg.port = doc.value("port", cfg.port);

    if (doc.contains("campaign")) {
      const auto& c = doc["campaign"];
      cfg.campaign.seed = c.value("seed", cfg.campaign.seed);
      cfg.campaign.sample_size = c.value("sample_size", cfg.campaign.sample_size);
      cfg.campaign.min_rounds = c.value("min_rounds", cfg.campaign.min_rounds);
      if (c.contains("criteria")) cfg.campaign.criteria = parse_criteria(c["criteria"]);
      cfg.campaign.max_turns = c.value("max_turns", cfg.campaign.max_turns);
      cfg.campaign.parallelism = c.value("parallelism", cfg.campaign.parallelism);
      cfg.campaign.batch_limit = c.value("batch_limit", cfg.campaign.batch_limit);
    }

    if (doc.contains("systems")) {
      for (const auto& s : doc["systems"]) {
        SystemConfig sys;
        sys.name = s.at("name").get<std::string>();
        sys.agent = s.value("agent", sys.agent);
        if (sys.agent != "copilot" && sys.agent != "bare") {
          throw ConfigError("system '" + sys.name + "' has unknown agent '" + sys.agent + "'");
        }
        sys.backend = s.value("backend", sys.backend);
        sys.engine = cfg.engine;
        if (s.contains("safety")) parse_safety(s["safety"], sys.engine);
        sys.engine.inquiry_enabled = s.value("inquiry_enabled", sys.engine.inquiry_enabled);
        cfg.systems.push_back(std::move(sys));
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

void apply_env_overrides(ServiceConfig& cfg, const EnvLookup& env) {
  if (auto v = env("COPILOT_DATA_DIR")) cfg.data_dir = *v;
  if (auto v = env("COPILOT_PORT")) {
    try {
      cfg.port = std::stoi(*v);
    } catch (const std::exception&) {
      throw ConfigError("COPILOT_PORT is not a number");
    }
  }
  if (auto v = env("COPILOT_DOCTOR_TOKEN")) cfg.doctor.token = *v;
  if (!cfg.doctor.token_env.empty()) {
    if (auto v = env(cfg.doctor.token_env)) cfg.doctor.token = *v;
  }
  for (auto& [role, b] : cfg.backends) {
    const auto prefix = "COPILOT_" + env_role(role) + "_";
    if (auto v = env(prefix + "ENDPOINT")) b.endpoint = *v;
    if (auto v = env(prefix + "MODEL")) b.model = *v;
    if (!b.api_key_env.empty()) {
      if (auto v = env(b.api_key_env)) b.api_key = *v;
    }
  }
  if (!cfg.search.api_key_env.empty()) {
    if (auto v = env(cfg.search.api_key_env)) cfg.search.api_key = *v;
  }
}

void validate(const ServiceConfig& cfg) {
  if (cfg.engine.max_inquiry_rounds < 0) throw ConfigError("max_inquiry_rounds must be >= 0");
  try {
    cfg.retention.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  }
  if (cfg.retry.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (cfg.port < 0 || cfg.port > 65535) throw ConfigError("port out of range");
  if (cfg.search.kind == SearchConfig::Kind::http && cfg.search.endpoint.empty()) {
    throw ConfigError("http search provider needs an endpoint");
  }
  if (cfg.campaign.max_turns < 0) throw ConfigError("campaign max_turns must be >= 0");
  if (cfg.campaign.batch_limit == 0) throw ConfigError("campaign batch_limit must be positive");
  for (const auto& [role, b] : cfg.backends) {
    if (b.kind == BackendConfig::Kind::http && b.endpoint.empty()) {
      throw ConfigError("backend '" + role + "' needs an endpoint");
    }
    if (b.kind == BackendConfig::Kind::scripted && b.script.empty()) {
      throw ConfigError("backend '" + role + "' needs a script file");
    }
  }
}

ServiceConfig load_config(const fs::path& path, const EnvLookup& env) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("configuration " + path.string() + " is not valid JSON: " + e.what());
  }
  auto cfg = parse_config(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path());
  apply_env_overrides(cfg, env);
  validate(cfg);
  return cfg;
}

BackendHandle make_backend(const BackendConfig& cfg) {
  if (cfg.kind == BackendConfig::Kind::scripted) {
    return make_scripted_backend(load_script(cfg.script));
  }
  return make_http_backend({cfg.endpoint, cfg.api_key, cfg.model, cfg.timeout});
}

LlmClient make_client(const ServiceConfig& cfg, const std::string& role) {
  auto it = cfg.backends.find(role);
  if (it == cfg.backends.end()) throw ConfigError("no backend configured for role '" + role + "'");
  return LlmClient(make_backend(it->second), cfg.retry, it->second.model);
}

}  // namespace copilot
