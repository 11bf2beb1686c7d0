#include "copilot/simulation.hpp"

#include "copilot/errors.hpp"
#include "copilot/storage.hpp"
#include "text.hpp"

namespace copilot {

std::string SimulationTranscript::text() const {
  std::string out;
  for (const auto& t : turns) {
    if (!out.empty()) out += '\n';
    out += t.speaker == Speaker::patient ? "Patient: " : "Doctor: ";
    out += t.text;
  }
  return out;
}

SimulationTranscript simulate_consultation(const LlmClient& patient, ConsultationAgent& copilot,
                                           const PromptLibrary& prompts,
                                           const ReferenceDialogue& ref, int max_turns,
                                           Transcript* log) {
  if (max_turns < 0) throw PreconditionError("max_turns must be non-negative");
  SimulationTranscript out;
  out.reference_id = ref.id;

  auto opener = patient.ask("patient_opener",
                            std::string(kOpenerInstruction) + "\n\n" + ref.description, 0.7, log);
  opener = std::string(trim(opener));
  if (opener.empty()) throw BackendRefusal("virtual patient returned an empty opening message");
  out.turns.push_back({Speaker::patient, opener, "opener"});
  if (max_turns == 0) {
    out.turn_cap_reached = true;
    return out;
  }

  const auto reference = render_reference(ref);
  std::string message = opener;
  int outputs = 0;
  for (;;) {
    auto outcome = copilot.on_patient_message(message);
    ++outputs;
    if (outcome.kind == OutcomeKind::review_pending) {
      outcome.text = copilot.resolve_review(DoctorAction::approve());
      outcome.kind = OutcomeKind::reply;
    }
    if (outcome.kind == OutcomeKind::reply) {
      out.turns.push_back({Speaker::copilot, outcome.text, "answer"});
      break;
    }
    out.turns.push_back({Speaker::copilot, outcome.text, "question"});
    if (outputs >= max_turns) {
      out.turn_cap_reached = true;
      break;
    }
    message = std::string(trim(patient.ask(
        "virtual_patient",
        prompts.render(TemplateId::virtual_patient,
                       {{"reference_dialogue", reference}, {"question", outcome.text}}),
        0.7, log)));
    if (message.empty()) throw BackendRefusal("virtual patient returned an empty reply");
    out.turns.push_back({Speaker::patient, message, "patient_reply"});
  }
  return out;
}

BareBackboneAgent::BareBackboneAgent(LlmClient client, double temperature, Transcript* log)
    : client_(std::move(client)), temperature_(temperature), log_(log) {
  history_.push_back({Role::system, std::string(kSystemPrompt)});
}

TurnOutcome BareBackboneAgent::on_patient_message(std::string text) {
  if (trim(text).empty()) throw PreconditionError("patient message is empty");
  CompletionRequest req;
  req.messages = history_;
  req.messages.push_back({Role::user, std::move(text)});
  req.temperature = temperature_;
  req.metadata[std::string(kStageKey)] = "bare";
  auto result = client_.complete(req, log_);
  const auto reply = std::string(trim(result.content));
  if (reply.empty()) throw BackendRefusal("backbone returned empty output");
  history_ = std::move(req.messages);
  history_.push_back({Role::assistant, reply});
  return {reply.ends_with('?') ? OutcomeKind::question : OutcomeKind::reply, reply};
}

// --- doctor campaign -------------------------------------------------------------

namespace {

bool is_no_guidance(std::string_view reply) {
  auto t = trim(reply);
  while (!t.empty() && (t.back() == '.' || t.back() == '"')) t.remove_suffix(1);
  while (!t.empty() && t.front() == '"') t.remove_prefix(1);
  return t.empty() || to_lower(t) == to_lower(kNoGuidance);
}

}  // namespace

DoctorCampaignResult run_doctor_campaign(const DialogueEngine& copilot, const LlmClient* reviewer,
                                         const LlmClient& judge, std::span<const DoctorCase> cases,
                                         Transcript* log) {
  DoctorCampaignResult result;
  for (const auto& c : cases) {
    if (trim(c.response).empty()) throw PreconditionError("case '" + c.id + "' has no response");
    DoctorCaseOutcome o;
    o.id = c.id;
    if (c.guidance) {
      if (!trim(*c.guidance).empty()) o.guidance = *c.guidance;
    } else {
      if (!reviewer) throw PreconditionError("case '" + c.id + "' needs a reviewer backend");
      const auto prompt = substitute(kReviewerInstruction, {{"response", c.response}});
      const auto reply = reviewer->ask("doctor_reviewer", prompt, 0.0, log);
      if (!is_no_guidance(reply)) o.guidance = std::string(trim(reply));
    }

    PendingResponse pending;
    pending.raw = c.response;
    pending.safe = c.response;
    if (o.guidance) {
      ++result.guided;
      o.revised = copilot.apply_doctor(pending, DoctorAction::guide(*o.guidance), log);
      o.judgement = validate_doctor_edit(judge, copilot.prompts(), c.response, *o.guidance,
                                         o.revised, log);
      ++result.validator_calls;
      if (o.judgement->incorporated) ++result.incorporated;
      if (o.judgement->placed_correctly) ++result.placed_correctly;
    } else {
      o.revised = copilot.apply_doctor(pending, DoctorAction::approve(), log);
    }
    result.cases.push_back(std::move(o));
  }
  return result;
}

std::vector<DoctorCase> read_doctor_cases(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("cannot read cases " + path.string());
  std::vector<DoctorCase> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      DoctorCase c;
      c.id = j.value("id", std::to_string(line));
      c.response = j.at("response").get<std::string>();
      if (j.contains("guidance") && !j["guidance"].is_null()) {
        c.guidance = j["guidance"].get<std::string>();
      }
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(e.what(), line);
    }
  }
  return out;
}

}  // namespace copilot
