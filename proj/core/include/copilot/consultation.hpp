#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "copilot/dialogue.hpp"

namespace copilot {

enum class OutcomeKind { question, reply, review_pending };

std::string_view to_string(OutcomeKind k);

struct TurnOutcome {
  OutcomeKind kind = OutcomeKind::reply;
  /// Question text, released answer, or the safety-checked text awaiting
  /// review.
  std::string text;
};

/// Anything that answers patient messages: the full copilot pipeline or a bare
/// backbone used as an ablation baseline.
class ConsultationAgent {
 public:
  virtual ~ConsultationAgent() = default;
  virtual TurnOutcome on_patient_message(std::string text) = 0;
  /// Releases a response held for doctor review. Agents without a doctor gate
  /// never return review_pending and need not override this.
  virtual std::string resolve_review(const DoctorAction& action);
};

/// Returns search snippets for a query; an empty function means no provider.
using SearchFn = std::function<std::string(std::string_view query)>;

struct ConsultationOptions {
  /// When false, every answer is approved as soon as it passes safety.
  bool doctor_attached = false;
  /// Rendered history memory, bound to `{clinical_record}`.
  std::string history_memory;
  SearchFn search;
};

/// Drives one session through the consultation flow: classify, inquire,
/// answer, safety pass, doctor gate, release. Each public call is atomic with
/// respect to the session state: when a backend call fails the state, phase
/// trace and audit log are left as they were before the call.
class Consultation final : public ConsultationAgent {
 public:
  Consultation(const DialogueEngine& engine, SessionState state, ConsultationOptions options = {},
               Clock clock = system_clock_now);

  TurnOutcome on_patient_message(std::string text) override;

  /// Requires phase doctor_review. Returns the released text.
  std::string resolve_review(const DoctorAction& action) override;

  /// Requires phase awaiting_input.
  void close();

  const SessionState& state() const { return state_; }
  /// Every phase the session has entered, starting with its initial phase.
  const std::vector<Phase>& phase_trace() const { return trace_; }
  /// Gate log: "safety_pass", "safety_skipped", "apply_doctor:<kind>",
  /// "release".
  const std::vector<std::string>& audit() const { return audit_; }
  Transcript& transcript() { return *transcript_; }
  const Transcript& transcript() const { return *transcript_; }

  void set_history_memory(std::string memory) { options_.history_memory = std::move(memory); }
  void set_doctor_attached(bool attached) { options_.doctor_attached = attached; }

 private:
  struct Work {
    SessionState state;
    std::vector<Phase> trace;
    std::vector<std::string> audit;
  };

  void advance(Work& w, Event ev) const;
  TurnOutcome continue_task(Work& w) const;
  TurnOutcome answer_and_gate(Work& w) const;
  std::string finish(Work& w, const DoctorAction& action) const;
  void commit(Work&& w);

  const DialogueEngine* engine_;
  SessionState state_;
  ConsultationOptions options_;
  Clock clock_;
  std::vector<Phase> trace_;
  std::vector<std::string> audit_;
  std::unique_ptr<Transcript> transcript_ = std::make_unique<Transcript>();
};

}  // namespace copilot
