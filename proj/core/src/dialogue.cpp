#include "copilot/dialogue.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "copilot/errors.hpp"
#include "text.hpp"

namespace copilot {

namespace {

constexpr std::array<Event, 9> kEvents = {
    Event::patient_message, Event::classified,  Event::inquiry_question_emitted,
    Event::inquiry_done,    Event::raw_ready,   Event::safety_done,
    Event::doctor_done,     Event::release,     Event::close,
};

constexpr std::array<Phase, 7> kPhases = {
    Phase::awaiting_input, Phase::classifying,   Phase::inquiring, Phase::answering,
    Phase::safety_review,  Phase::doctor_review, Phase::closed,
};

bool holds_pending(Phase p) { return p == Phase::safety_review || p == Phase::doctor_review; }

}  // namespace

std::string_view to_string(TaskKind t) {
  switch (t) {
    case TaskKind::diagnosis: return "diagnosis";
    case TaskKind::explanation: return "explanation";
    case TaskKind::recommendation: return "recommendation";
  }
  return "diagnosis";
}

std::optional<TaskKind> task_from_string(std::string_view s) {
  if (s == "diagnosis") return TaskKind::diagnosis;
  if (s == "explanation") return TaskKind::explanation;
  if (s == "recommendation") return TaskKind::recommendation;
  return std::nullopt;
}

std::string_view to_string(Speaker s) { return s == Speaker::patient ? "patient" : "copilot"; }

Speaker speaker_from_string(std::string_view s) {
  if (s == "patient") return Speaker::patient;
  if (s == "copilot") return Speaker::copilot;
  throw PreconditionError("unknown speaker: " + std::string(s));
}

std::string serialize_turns(std::span<const ChatTurn> turns) {
  std::string out;
  for (const auto& t : turns) {
    if (!out.empty()) out += '\n';
    out += t.role == Speaker::patient ? "Patient: " : "Doctor: ";
    out += t.text;
  }
  return out;
}

std::vector<std::pair<Speaker, std::string>> parse_serialized_turns(std::string_view text) {
  std::vector<std::pair<Speaker, std::string>> out;
  constexpr std::string_view kPatient = "Patient: ";
  constexpr std::string_view kDoctor = "Doctor: ";
  for (auto line : split_lines(text)) {
    if (line.starts_with(kPatient)) {
      out.emplace_back(Speaker::patient, std::string(line.substr(kPatient.size())));
    } else if (line.starts_with(kDoctor)) {
      out.emplace_back(Speaker::copilot, std::string(line.substr(kDoctor.size())));
    } else if (!out.empty()) {
      out.back().second += '\n';
      out.back().second += line;
    }
  }
  return out;
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::awaiting_input: return "awaiting_input";
    case Phase::classifying: return "classifying";
    case Phase::inquiring: return "inquiring";
    case Phase::answering: return "answering";
    case Phase::safety_review: return "safety_review";
    case Phase::doctor_review: return "doctor_review";
    case Phase::closed: return "closed";
  }
  return "closed";
}

std::optional<Phase> phase_from_string(std::string_view s) {
  for (auto p : kPhases) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

std::string_view to_string(Event e) {
  switch (e) {
    case Event::patient_message: return "patient_message";
    case Event::classified: return "classified";
    case Event::inquiry_question_emitted: return "inquiry_question_emitted";
    case Event::inquiry_done: return "inquiry_done";
    case Event::raw_ready: return "raw_ready";
    case Event::safety_done: return "safety_done";
    case Event::doctor_done: return "doctor_done";
    case Event::release: return "release";
    case Event::close: return "close";
  }
  return "close";
}

std::span<const Event> all_events() { return kEvents; }
std::span<const Phase> all_phases() { return kPhases; }

void DoctorAction::validate() const {
  if (kind != Kind::approve && text.empty()) {
    throw PreconditionError("doctor edit/guidance needs non-empty text");
  }
}

std::string_view to_string(DoctorAction::Kind k) {
  switch (k) {
    case DoctorAction::Kind::approve: return "approve";
    case DoctorAction::Kind::direct_edit: return "edit";
    case DoctorAction::Kind::guidance: return "guide";
  }
  return "approve";
}

std::optional<DoctorAction::Kind> doctor_action_from_string(std::string_view s) {
  if (s == "approve") return DoctorAction::Kind::approve;
  if (s == "edit" || s == "direct_edit") return DoctorAction::Kind::direct_edit;
  if (s == "guide" || s == "guidance") return DoctorAction::Kind::guidance;
  return std::nullopt;
}

// --- state machine -----------------------------------------------------------

std::optional<Phase> next_phase(Phase from, Event ev, std::optional<TaskKind> task) {
  switch (from) {
    case Phase::awaiting_input:
      if (ev == Event::patient_message) return Phase::classifying;
      if (ev == Event::close) return Phase::closed;
      break;
    case Phase::classifying:
      if (ev == Event::classified && task) {
        return *task == TaskKind::diagnosis ? Phase::inquiring : Phase::answering;
      }
      break;
    case Phase::inquiring:
      if (ev == Event::patient_message || ev == Event::inquiry_question_emitted) {
        return Phase::inquiring;
      }
      if (ev == Event::inquiry_done) return Phase::answering;
      break;
    case Phase::answering:
      if (ev == Event::raw_ready) return Phase::safety_review;
      break;
    case Phase::safety_review:
      if (ev == Event::safety_done) return Phase::doctor_review;
      break;
    case Phase::doctor_review:
      if (ev == Event::doctor_done) return Phase::doctor_review;
      if (ev == Event::release) return Phase::awaiting_input;
      break;
    case Phase::closed:
      break;
  }
  return std::nullopt;
}

SessionState step(SessionState state, Event ev) {
  const auto illegal = [&](std::string_view why) {
    std::string msg = "illegal transition (" + std::string(to_string(state.phase)) + ", " +
                      std::string(to_string(ev)) + ")";
    if (!why.empty()) msg += ": " + std::string(why);
    return IllegalTransition(msg);
  };

  const auto next = next_phase(state.phase, ev, state.task);
  if (!next) throw illegal("");

  const auto& p = state.pending;
  switch (ev) {
    case Event::raw_ready:
      if (!p || p->raw.empty()) throw illegal("no raw response pending");
      break;
    case Event::safety_done:
      if (!p || !p->safe) throw illegal("safety output missing");
      break;
    case Event::doctor_done:
      if (!p || !p->final_text) throw illegal("doctor output missing");
      break;
    case Event::release:
      if (!p || !p->final_text) throw illegal("nothing to release");
      state.pending.reset();
      break;
    case Event::inquiry_question_emitted:
      if (state.task != TaskKind::diagnosis) throw illegal("inquiry only runs for diagnosis");
      break;
    default:
      break;
  }
  state.phase = *next;
  if (state.pending.has_value() != holds_pending(state.phase)) {
    throw illegal("pending response does not match phase");
  }
  return state;
}

// --- parsing helpers ---------------------------------------------------------

bool contains_inquiry_sentinel(std::string_view output) {
  return to_lower(output).find(to_lower(kInquirySentinel)) != std::string::npos;
}

std::optional<TaskKind> parse_task_label(std::string_view reply) {
  std::string norm;
  norm.reserve(reply.size());
  for (unsigned char c : reply) {
    norm += std::ispunct(c) ? ' ' : static_cast<char>(std::tolower(c));
  }
  const auto words = split_words(norm);
  const auto has = [&](std::string_view w) {
    return std::find(words.begin(), words.end(), w) != words.end();
  };
  std::optional<TaskKind> found;
  int hits = 0;
  for (auto [word, kind] : {std::pair{"diagnosis", TaskKind::diagnosis},
                            std::pair{"explanation", TaskKind::explanation},
                            std::pair{"recommendation", TaskKind::recommendation}}) {
    if (has(word)) {
      found = kind;
      ++hits;
    }
  }
  return hits == 1 ? found : std::nullopt;
}

// --- engine ------------------------------------------------------------------

DialogueEngine::DialogueEngine(LlmClient client, const PromptLibrary& prompts, EngineConfig config)
    : client_(std::move(client)), prompts_(&prompts), config_(std::move(config)) {
  if (config_.max_inquiry_rounds < 0) {
    throw PreconditionError("max_inquiry_rounds must be non-negative");
  }
}

TaskKind DialogueEngine::classify(std::string_view user_input, Transcript* transcript) const {
  if (trim(user_input).empty()) throw PreconditionError("cannot classify empty input");
  const auto prompt =
      prompts_->render(TemplateId::classification, {{"user_input", std::string(user_input)}});
  std::string last_reply;
  for (int attempt = 0; attempt < 2; ++attempt) {
    last_reply = client_.ask("classify", prompt, config_.parse_temperature, transcript);
    if (auto kind = parse_task_label(last_reply)) return *kind;
  }
  throw Unclassifiable("classifier reply names no single task: '" + last_reply + "'");
}

InquiryResult DialogueEngine::next_inquiry(SessionState& state, std::string_view history_memory,
                                           Timestamp now, Transcript* transcript) const {
  if (state.task != TaskKind::diagnosis || state.phase != Phase::inquiring) {
    throw PreconditionError("next_inquiry needs a diagnosis task in the inquiring phase");
  }
  if (!config_.inquiry_enabled || state.inquiry_round >= config_.max_inquiry_rounds) {
    return InquiryDone{};
  }
  const auto opener = state.opener.value_or(0);
  if (opener >= state.turns.size()) throw PreconditionError("session has no opening message");

  const auto prompt = prompts_->render(TemplateId::inquiry,
                                       {{"user_input", state.turns[opener].text},
                                        {"chat_history", serialize_turns(state.turns)},
                                        {"clinical_record", std::string(history_memory)},
                                        {"date", format_minute(now)}});
  const auto reply = client_.ask("inquiry", prompt, config_.generation_temperature, transcript);
  const auto question = trim(reply);
  if (question.empty()) throw MalformedInquiry("inquiry backend returned empty output");
  if (contains_inquiry_sentinel(question)) return InquiryDone{};
  ++state.inquiry_round;
  return InquiryStep{std::string(question)};
}

std::string DialogueEngine::answer(const SessionState& state, std::string_view history_memory,
                                   std::string_view search_snippets, Timestamp now,
                                   Transcript* transcript) const {
  if (state.phase != Phase::answering || !state.task) {
    throw PreconditionError("answer needs a classified task in the answering phase");
  }
  const auto history = serialize_turns(state.turns);
  const auto task = *state.task;
  if (task == TaskKind::diagnosis) {
    const auto prompt = prompts_->render(TemplateId::diagnosis,
                                         {{"history", history},
                                          {"clinical_record", std::string(history_memory)},
                                          {"date", format_minute(now)}});
    return client_.ask("diagnosis", prompt, config_.generation_temperature, transcript);
  }
  const auto opener = state.opener.value_or(state.turns.empty() ? 0 : state.turns.size() - 1);
  if (opener >= state.turns.size()) throw PreconditionError("session has no patient message");
  const auto id = task == TaskKind::explanation ? TemplateId::explanation : TemplateId::recommendation;
  const auto prompt = prompts_->render(id, {{"user_input", state.turns[opener].text},
                                            {"chat_history", history},
                                            {"google_search", std::string(search_snippets)}});
  return client_.ask(std::string(to_string(task)), prompt, config_.generation_temperature,
                     transcript);
}

SafetyOutcome DialogueEngine::safety_pass(std::string_view raw, Transcript* transcript) const {
  if (trim(raw).empty()) throw PreconditionError("safety pass needs a non-empty response");
  const auto prompt = prompts_->render(TemplateId::safety, {{"suggestion", std::string(raw)}});
  auto out = client_.ask("safety", prompt, config_.generation_temperature, transcript);
  if (trim(out).empty()) return {std::string(raw), true};
  return {std::move(out), false};
}

std::string DialogueEngine::apply_doctor(const PendingResponse& pending, const DoctorAction& action,
                                         Transcript* transcript) const {
  if (!pending.safe) throw PreconditionError("doctor review needs a safety-checked response");
  action.validate();
  switch (action.kind) {
    case DoctorAction::Kind::approve:
      return *pending.safe;
    case DoctorAction::Kind::direct_edit:
      return action.text;
    case DoctorAction::Kind::guidance:
      break;
  }
  const auto prompt = prompts_->render(
      TemplateId::doctor, {{"result", *pending.safe}, {"recommendations", action.text}});
  return client_.ask("doctor", prompt, config_.generation_temperature, transcript);
}

}  // namespace copilot
