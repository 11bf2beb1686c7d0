#pragma once

// Session service behind the HTTP API: session lifecycle, turn exchange, the
// doctor review queue, closing with report and memory update, and crash
// recovery from the data directory.
//
// Data directory layout:
//   sessions/<id>.json      authoritative snapshot, replaced atomically
//   transcripts/<id>.jsonl  turn log, reconciled to the snapshot on startup
//   histories/<patient>.jsonl
//   reports/<id>.txt, reports/<id>.json

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "copilot/config.hpp"
#include "copilot/consultation.hpp"
#include "copilot/errors.hpp"
#include "copilot/report.hpp"
#include "copilot/search.hpp"
#include "copilot/storage.hpp"

namespace copilot {

/// A request the service refuses, with the HTTP status to report.
class ServiceError : public Error {
 public:
  ServiceError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

enum class ReviewStatus { open, approved, edited, guided };

std::string_view to_string(ReviewStatus s);

struct ReviewItem {
  std::string review_id;
  std::string session_id;
  std::string safe_text;
  Timestamp created_at{};
  ReviewStatus status = ReviewStatus::open;
  /// Approved by the timeout sweep rather than a doctor.
  bool auto_approved = false;
};

nlohmann::json to_json(const ReviewItem& r);

struct ServiceDeps {
  LlmClient copilot;
  std::shared_ptr<SearchProvider> search = make_null_search();
  Clock clock = system_clock_now;
};

struct CloseResult {
  ConsultationReport report;
  MemoryRecord memory_record;
};

class CopilotService {
 public:
  /// Loads every session snapshot under the data directory. A missing or
  /// unwritable directory is not an error here; writes fail later with 500.
  CopilotService(ServiceConfig config, const PromptLibrary& prompts, ServiceDeps deps);
  ~CopilotService();

  CopilotService(const CopilotService&) = delete;
  CopilotService& operator=(const CopilotService&) = delete;

  /// 400 on a missing or malformed patient id, 500 when the snapshot cannot
  /// be written.
  SessionState create_session(const std::string& patient_id);

  /// Session view: id, patient, phase, turns, open review. 404 if unknown.
  nlohmann::json session_view(const std::string& session_id) const;

  /// 404 unknown session, 409 when another turn is in flight, the session is
  /// closed or awaiting review, 502 when a backend fails.
  TurnOutcome post_message(const std::string& session_id, const std::string& text);

  std::vector<ReviewItem> open_reviews() const;
  /// Open review items with their session transcript and history memory.
  nlohmann::json review_queue() const;

  /// 404 unknown item, 409 when the item is no longer open or the session is
  /// busy. Returns the released text.
  std::string act_on_review(const std::string& review_id, const DoctorAction& action);

  /// Approves open items older than the configured timeout. Returns how many.
  std::size_t sweep_auto_approve();

  /// 409 when empty, mid-turn, awaiting review or already closed.
  CloseResult close_session(const std::string& session_id);

  PatientHistory history(const std::string& patient_id) const;

  /// Gate log of the in-memory consultation (reset on restart).
  std::vector<std::string> audit(const std::string& session_id) const;

  const ServiceConfig& config() const { return config_; }
  std::size_t session_count() const;

 private:
  struct Slot;

  std::shared_ptr<Slot> find(const std::string& session_id) const;
  void persist(Slot& slot, const SessionState& state, std::size_t logged_turns);
  void recover();
  std::string new_session_id();
  ConsultationOptions options_for(const SessionState& state) const;

  ServiceConfig config_;
  const PromptLibrary* prompts_;
  ServiceDeps deps_;
  DialogueEngine engine_;
  std::filesystem::path sessions_dir_;
  std::filesystem::path reports_dir_;
  HistoryStore histories_;
  TranscriptLog transcripts_;

  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::map<std::string, std::string> review_index_;
};

/// Loads the snapshot for one session (tests use it to inspect crash
/// recovery). Returns nullopt when absent.
std::optional<SessionState> read_session_snapshot(const std::filesystem::path& data_dir,
                                                  const std::string& session_id);

}  // namespace copilot
