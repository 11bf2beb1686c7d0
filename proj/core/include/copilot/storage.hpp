#pragma once

// File persistence: line-delimited JSON logs plus atomically replaced
// snapshots. Layout under a data directory:
//   histories/<patient>.jsonl    {recorded_at, retention, summary}
//   transcripts/<session>.jsonl  {role, text, at}
//   sessions/<session>.json      session snapshot
//   reports/<session>.txt|.json  consultation reports

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "copilot/dialogue.hpp"
#include "copilot/memory.hpp"

namespace copilot {

/// Writes `content` to a temporary sibling, flushes it and renames it over
/// `path`. Throws Error on I/O failure.
void atomic_write(const std::filesystem::path& path, std::string_view content);

/// Appends one line (a newline is added) and flushes.
void append_line(const std::filesystem::path& path, std::string_view line);

/// Reads a JSON-lines file; blank lines are skipped. Throws FormatError with
/// the 1-based line number on a malformed line. A missing file yields {}.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

nlohmann::json to_json(const ChatTurn& t);
ChatTurn turn_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MemoryRecord& r);
MemoryRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SessionState& s);
SessionState session_from_json(const nlohmann::json& j);

/// Restricts ids used as file names to [A-Za-z0-9_.-]; throws
/// PreconditionError otherwise.
void check_file_id(std::string_view id);

/// Per-patient history files with one writer per patient at a time.
class HistoryStore {
 public:
  explicit HistoryStore(std::filesystem::path dir);

  bool exists(std::string_view patient_id) const;
  PatientHistory load(std::string_view patient_id) const;
  void save(const PatientHistory& history);

  /// Lock held by callers that read-modify-write one patient's history.
  std::unique_lock<std::mutex> lock(std::string_view patient_id);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(std::string_view patient_id) const;

  std::filesystem::path dir_;
  std::mutex map_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>, std::less<>> locks_;
};

/// Append-only per-session turn log.
class TranscriptLog {
 public:
  explicit TranscriptLog(std::filesystem::path dir);

  void append(std::string_view session_id, const ChatTurn& turn);
  std::vector<ChatTurn> load(std::string_view session_id) const;
  /// Rewrites the log to exactly `turns`.
  void replace(std::string_view session_id, const std::vector<ChatTurn>& turns);
  std::filesystem::path path_for(std::string_view session_id) const;

 private:
  std::filesystem::path dir_;
};

}  // namespace copilot
