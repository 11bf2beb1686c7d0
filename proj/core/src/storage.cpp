#include "copilot/storage.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

#include "copilot/errors.hpp"

namespace copilot {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void fsync_path(const fs::path& p) {
  const int fd = ::open(p.c_str(), O_RDONLY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

Timestamp parse_time_field(const json& j, const char* key) {
  const auto text = j.at(key).get<std::string>();
  auto t = parse_timestamp(text);
  if (!t) throw PreconditionError(std::string("bad timestamp in field '") + key + "': " + text);
  return *t;
}

}  // namespace

void atomic_write(const fs::path& path, std::string_view content) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("short write to " + tmp.string());
  }
  fsync_path(tmp);
  fs::rename(tmp, path, ec);
  if (ec) throw Error("cannot replace " + path.string() + ": " + ec.message());
}

void append_line(const fs::path& path, std::string_view line) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot append to " + path.string());
  out << line << '\n';
  out.flush();
  if (!out) throw Error("short write to " + path.string());
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::vector<json> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), n);
    }
  }
  return out;
}

json to_json(const ChatTurn& t) {
  return {{"role", to_string(t.role)}, {"text", t.text}, {"at", format_iso8601(t.at)}};
}

ChatTurn turn_from_json(const json& j) {
  return {speaker_from_string(j.at("role").get<std::string>()), j.at("text").get<std::string>(),
          parse_time_field(j, "at")};
}

json to_json(const MemoryRecord& r) {
  return {{"recorded_at", format_iso8601(r.recorded_at)},
          {"retention", to_string(r.retention)},
          {"summary", r.summary}};
}

MemoryRecord record_from_json(const json& j) {
  MemoryRecord r;
  r.recorded_at = parse_time_field(j, "recorded_at");
  const auto retention = j.at("retention").get<std::string>();
  auto parsed = retention_from_string(retention);
  if (!parsed) throw PreconditionError("unknown retention class '" + retention + "'");
  r.retention = *parsed;
  r.summary = j.at("summary").get<std::string>();
  return r;
}

json to_json(const SessionState& s) {
  json j;
  j["session_id"] = s.session_id;
  j["patient_id"] = s.patient_id;
  j["started_at"] = format_iso8601(s.started_at);
  j["phase"] = to_string(s.phase);
  j["inquiry_round"] = s.inquiry_round;
  j["task"] = s.task ? json(to_string(*s.task)) : json(nullptr);
  j["opener"] = s.opener ? json(*s.opener) : json(nullptr);
  j["turns"] = json::array();
  for (const auto& t : s.turns) j["turns"].push_back(to_json(t));
  if (s.pending) {
    const auto& p = *s.pending;
    j["pending"] = {{"raw", p.raw},
                    {"safe", p.safe ? json(*p.safe) : json(nullptr)},
                    {"final", p.final_text ? json(*p.final_text) : json(nullptr)},
                    {"safety_flagged", p.safety_flagged}};
  } else {
    j["pending"] = nullptr;
  }
  return j;
}

SessionState session_from_json(const json& j) {
  SessionState s;
  s.session_id = j.at("session_id").get<std::string>();
  s.patient_id = j.at("patient_id").get<std::string>();
  s.started_at = parse_time_field(j, "started_at");
  const auto phase = j.at("phase").get<std::string>();
  auto p = phase_from_string(phase);
  if (!p) throw PreconditionError("unknown phase '" + phase + "'");
  s.phase = *p;
  s.inquiry_round = j.value("inquiry_round", 0);
  if (j.contains("task") && !j["task"].is_null()) {
    s.task = task_from_string(j["task"].get<std::string>());
  }
  if (j.contains("opener") && !j["opener"].is_null()) s.opener = j["opener"].get<std::size_t>();
  for (const auto& t : j.at("turns")) s.turns.push_back(turn_from_json(t));
  if (j.contains("pending") && !j["pending"].is_null()) {
    const auto& pj = j["pending"];
    PendingResponse pr;
    pr.raw = pj.at("raw").get<std::string>();
    if (!pj["safe"].is_null()) pr.safe = pj["safe"].get<std::string>();
    if (!pj["final"].is_null()) pr.final_text = pj["final"].get<std::string>();
    pr.safety_flagged = pj.value("safety_flagged", false);
    s.pending = std::move(pr);
  }
  return s;
}

void check_file_id(std::string_view id) {
  if (id.empty() || id.size() > 128 || id == "." || id == "..") {
    throw PreconditionError("invalid identifier '" + std::string(id) + "'");
  }
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    if (!ok) throw PreconditionError("invalid identifier '" + std::string(id) + "'");
  }
}

// --- histories ---------------------------------------------------------------

HistoryStore::HistoryStore(fs::path dir) : dir_(std::move(dir)) {}

fs::path HistoryStore::path_for(std::string_view patient_id) const {
  check_file_id(patient_id);
  return dir_ / (std::string(patient_id) + ".jsonl");
}

bool HistoryStore::exists(std::string_view patient_id) const {
  return fs::exists(path_for(patient_id));
}

PatientHistory HistoryStore::load(std::string_view patient_id) const {
  PatientHistory h{std::string(patient_id), {}};
  const auto path = path_for(patient_id);
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      h.records.push_back(record_from_json(j));
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ": " + e.what(), line);
    }
  }
  return h;
}

void HistoryStore::save(const PatientHistory& history) {
  std::string content;
  for (const auto& r : history.records) {
    content += to_json(r).dump();
    content += '\n';
  }
  atomic_write(path_for(history.patient_id), content);
}

std::unique_lock<std::mutex> HistoryStore::lock(std::string_view patient_id) {
  std::mutex* m = nullptr;
  {
    std::lock_guard guard(map_mu_);
    auto it = locks_.find(patient_id);
    if (it == locks_.end()) {
      it = locks_.emplace(std::string(patient_id), std::make_unique<std::mutex>()).first;
    }
    m = it->second.get();
  }
  return std::unique_lock<std::mutex>(*m);
}

// --- transcripts -------------------------------------------------------------

TranscriptLog::TranscriptLog(fs::path dir) : dir_(std::move(dir)) {}

fs::path TranscriptLog::path_for(std::string_view session_id) const {
  check_file_id(session_id);
  return dir_ / (std::string(session_id) + ".jsonl");
}

void TranscriptLog::append(std::string_view session_id, const ChatTurn& turn) {
  append_line(path_for(session_id), to_json(turn).dump());
}

std::vector<ChatTurn> TranscriptLog::load(std::string_view session_id) const {
  std::vector<ChatTurn> out;
  for (const auto& j : read_jsonl(path_for(session_id))) out.push_back(turn_from_json(j));
  return out;
}

void TranscriptLog::replace(std::string_view session_id, const std::vector<ChatTurn>& turns) {
  std::string content;
  for (const auto& t : turns) {
    content += to_json(t).dump();
    content += '\n';
  }
  atomic_write(path_for(session_id), content);
}

}  // namespace copilot
