#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "copilot/gateway.hpp"
#include "copilot/prompts.hpp"
#include "copilot/timefmt.hpp"

namespace copilot {

enum class TaskKind { diagnosis, explanation, recommendation };

std::string_view to_string(TaskKind t);
std::optional<TaskKind> task_from_string(std::string_view s);

enum class Speaker { patient, copilot };

std::string_view to_string(Speaker s);
Speaker speaker_from_string(std::string_view s);

struct ChatTurn {
  Speaker role = Speaker::patient;
  std::string text;
  Timestamp at{};

  bool operator==(const ChatTurn&) const = default;
};

/// `Patient: ...` / `Doctor: ...` lines in turn order. This is the text fed
/// into `{chat_history}`, `{history}` and `{conversation}`.
std::string serialize_turns(std::span<const ChatTurn> turns);

/// Inverse of serialize_turns for turns whose text has no embedded newline
/// followed by a role label.
std::vector<std::pair<Speaker, std::string>> parse_serialized_turns(std::string_view text);

enum class Phase {
  awaiting_input,
  classifying,
  inquiring,
  answering,
  safety_review,
  doctor_review,
  closed,
};

std::string_view to_string(Phase p);
std::optional<Phase> phase_from_string(std::string_view s);

enum class Event {
  patient_message,
  classified,
  inquiry_question_emitted,
  inquiry_done,
  raw_ready,
  safety_done,
  doctor_done,
  release,
  close,
};

std::string_view to_string(Event e);
std::span<const Event> all_events();
std::span<const Phase> all_phases();

struct PendingResponse {
  std::string raw;
  std::optional<std::string> safe;
  std::optional<std::string> final_text;
  /// Safety pass returned nothing and `safe` fell back to `raw`.
  bool safety_flagged = false;

  bool operator==(const PendingResponse&) const = default;
};

struct DoctorAction {
  enum class Kind { approve, direct_edit, guidance };

  Kind kind = Kind::approve;
  std::string text;

  static DoctorAction approve() { return {Kind::approve, {}}; }
  static DoctorAction edit(std::string replacement) {
    return {Kind::direct_edit, std::move(replacement)};
  }
  static DoctorAction guide(std::string instruction) {
    return {Kind::guidance, std::move(instruction)};
  }

  /// Throws PreconditionError when text is empty for edit/guidance.
  void validate() const;
};

std::string_view to_string(DoctorAction::Kind k);
std::optional<DoctorAction::Kind> doctor_action_from_string(std::string_view s);

struct SessionState {
  std::string session_id;
  std::string patient_id;
  Timestamp started_at{};
  std::vector<ChatTurn> turns;
  Phase phase = Phase::awaiting_input;
  int inquiry_round = 0;
  std::optional<PendingResponse> pending;
  std::optional<TaskKind> task;
  /// Index into `turns` of the patient message that opened the current task.
  std::optional<std::size_t> opener;

  bool operator==(const SessionState&) const = default;
};

/// The transition table. Returns the next phase or nullopt when the pair is
/// not in the table. `classified` is the one state-dependent edge: it leads
/// to `inquiring` for diagnosis tasks and to `answering` otherwise.
std::optional<Phase> next_phase(Phase from, Event ev, std::optional<TaskKind> task);

/// Applies `ev` to `state`. Throws IllegalTransition for pairs outside the
/// table and for transitions that would break the pending/phase invariant.
/// `release` clears `pending`.
SessionState step(SessionState state, Event ev);

// --- engine ------------------------------------------------------------------

struct EngineConfig {
  int max_inquiry_rounds = 10;
  /// Temperature for stages whose output the engine parses.
  double parse_temperature = 0.0;
  double generation_temperature = 0.7;
  /// Per-task safety toggle (ablations switch it off).
  std::map<TaskKind, bool> safety_enabled{
      {TaskKind::diagnosis, true}, {TaskKind::explanation, true}, {TaskKind::recommendation, true}};
  /// When false, diagnosis tasks skip the inquiry loop (ablation).
  bool inquiry_enabled = true;
};

struct InquiryStep {
  std::string question;
};
struct InquiryDone {};
using InquiryResult = std::variant<InquiryStep, InquiryDone>;

inline constexpr std::string_view kInquirySentinel = "Questioning is over";

/// True when `output` carries the inquiry stop sentinel, in any case and with
/// any surrounding prose or punctuation.
bool contains_inquiry_sentinel(std::string_view output);

/// Maps a classifier reply to a task, or nullopt when it names none or
/// several. The reply is trimmed, lowercased and stripped of punctuation.
std::optional<TaskKind> parse_task_label(std::string_view reply);

struct SafetyOutcome {
  std::string text;
  /// The safety backend returned empty output; `text` is the raw response.
  bool flagged = false;
};

/// Stateless stage operations of the consultation flow. Each takes the
/// session transcript to record its gateway calls.
class DialogueEngine {
 public:
  DialogueEngine(LlmClient client, const PromptLibrary& prompts, EngineConfig config = {});

  TaskKind classify(std::string_view user_input, Transcript* transcript = nullptr) const;

  /// Requires state.task == diagnosis and phase == inquiring. Increments
  /// state.inquiry_round when a question is returned.
  InquiryResult next_inquiry(SessionState& state, std::string_view history_memory, Timestamp now,
                             Transcript* transcript = nullptr) const;

  std::string answer(const SessionState& state, std::string_view history_memory,
                     std::string_view search_snippets, Timestamp now,
                     Transcript* transcript = nullptr) const;

  SafetyOutcome safety_pass(std::string_view raw, Transcript* transcript = nullptr) const;

  /// approve -> safe; direct_edit -> action.text; guidance -> doctor prompt.
  std::string apply_doctor(const PendingResponse& pending, const DoctorAction& action,
                           Transcript* transcript = nullptr) const;

  const EngineConfig& config() const { return config_; }
  const PromptLibrary& prompts() const { return *prompts_; }
  const LlmClient& client() const { return client_; }

 private:
  LlmClient client_;
  const PromptLibrary* prompts_;
  EngineConfig config_;
};

}  // namespace copilot
