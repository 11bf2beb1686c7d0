#pragma once

// Virtual-patient consultations over reference dialogues, the bare-backbone
// baseline agent, and the doctor-guidance validation campaign.

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "copilot/consultation.hpp"
#include "copilot/eval.hpp"

namespace copilot {

/// System line prepended to the reference description when the patient
/// backend writes the opening complaint.
inline constexpr std::string_view kOpenerInstruction =
    "You are the patient described below. In one or two sentences, tell the doctor in the first "
    "person what is bothering you. Do not mention a diagnosis.";

struct SimulationTurn {
  Speaker speaker = Speaker::patient;
  std::string text;
  /// "opener", "patient_reply", "question" or "answer".
  std::string stage;

  bool operator==(const SimulationTurn&) const = default;
};

struct SimulationTranscript {
  std::string reference_id;
  std::string system;
  std::vector<SimulationTurn> turns;
  /// The copilot was still inquiring when max_turns ran out.
  bool turn_cap_reached = false;

  /// `Patient:` / `Doctor:` lines; the text judges see.
  std::string text() const;
};

/// Plays one consultation: the patient backend opens with a complaint
/// written from `ref.description`, then answers each copilot question through
/// the virtual-patient prompt until the copilot gives its answer or has
/// produced `max_turns` outputs. Responses held for review are approved.
SimulationTranscript simulate_consultation(const LlmClient& patient, ConsultationAgent& copilot,
                                           const PromptLibrary& prompts,
                                           const ReferenceDialogue& ref, int max_turns,
                                           Transcript* log = nullptr);

/// The backbone model on its own: the chat history goes straight to the
/// model. A reply ending in a question mark counts as an inquiry question.
class BareBackboneAgent final : public ConsultationAgent {
 public:
  static constexpr std::string_view kSystemPrompt =
      "You are a doctor consulting with a patient online.";

  explicit BareBackboneAgent(LlmClient client, double temperature = 0.7,
                             Transcript* log = nullptr);

  TurnOutcome on_patient_message(std::string text) override;

 private:
  LlmClient client_;
  double temperature_;
  Transcript* log_;
  std::vector<ChatMessage> history_;
};

// --- doctor campaign -------------------------------------------------------------

/// One instruction asking a reviewing model for guidance on a response;
/// `{response}` is substituted. The reviewer answers kNoGuidance when the
/// response needs nothing.
inline constexpr std::string_view kReviewerInstruction =
    "You are a doctor reviewing an AI doctor's response before it reaches the patient. If the "
    "response needs a correction or an addition, reply with one short guidance sentence; "
    "otherwise reply exactly \"No guidance\".\n\nresponse: {response}";
inline constexpr std::string_view kNoGuidance = "No guidance";

struct DoctorCase {
  std::string id;
  /// Safety-checked response shown to the doctor.
  std::string response;
  /// Guidance supplied with the case; when absent the reviewer is asked.
  std::optional<std::string> guidance;
};

struct DoctorCaseOutcome {
  std::string id;
  std::optional<std::string> guidance;
  std::string revised;
  std::optional<DoctorEditJudgement> judgement;
};

struct DoctorCampaignResult {
  std::vector<DoctorCaseOutcome> cases;
  std::size_t guided = 0;
  std::size_t validator_calls = 0;
  std::size_t incorporated = 0;
  std::size_t placed_correctly = 0;
};

/// For each case: obtain guidance (from the case or the reviewer), apply it
/// through the doctor prompt, and run the validator on guided cases only.
/// `reviewer` may be null when every case carries its guidance.
DoctorCampaignResult run_doctor_campaign(const DialogueEngine& copilot, const LlmClient* reviewer,
                                         const LlmClient& judge, std::span<const DoctorCase> cases,
                                         Transcript* log = nullptr);

std::vector<DoctorCase> read_doctor_cases(const std::filesystem::path& path);

}  // namespace copilot
