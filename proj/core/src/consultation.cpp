#include "copilot/consultation.hpp"

#include <algorithm>

#include "copilot/errors.hpp"
#include "text.hpp"

namespace copilot {

std::string_view to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::question: return "question";
    case OutcomeKind::reply: return "reply";
    case OutcomeKind::review_pending: return "review_pending";
  }
  return "reply";
}

std::string ConsultationAgent::resolve_review(const DoctorAction&) {
  throw IllegalTransition("this agent has no doctor review gate");
}

Consultation::Consultation(const DialogueEngine& engine, SessionState state,
                           ConsultationOptions options, Clock clock)
    : engine_(&engine),
      state_(std::move(state)),
      options_(std::move(options)),
      clock_(std::move(clock)),
      trace_{state_.phase} {}

void Consultation::advance(Work& w, Event ev) const {
  w.state = step(std::move(w.state), ev);
  w.trace.push_back(w.state.phase);
}

void Consultation::commit(Work&& w) {
  state_ = std::move(w.state);
  trace_ = std::move(w.trace);
  audit_ = std::move(w.audit);
}

TurnOutcome Consultation::on_patient_message(std::string text) {
  if (trim(text).empty()) throw PreconditionError("patient message is empty");
  Work w{state_, trace_, audit_};
  const bool opens_task = w.state.phase == Phase::awaiting_input;

  // Phases that do not accept patient input reject the message before it is
  // recorded; step() raises IllegalTransition.
  if (!next_phase(w.state.phase, Event::patient_message, w.state.task)) {
    (void)step(w.state, Event::patient_message);
  }
  auto at = clock_();
  if (!w.state.turns.empty() && at < w.state.turns.back().at) at = w.state.turns.back().at;
  w.state.turns.push_back({Speaker::patient, std::move(text), at});
  advance(w, Event::patient_message);

  if (opens_task) {
    w.state.opener = w.state.turns.size() - 1;
    w.state.inquiry_round = 0;
    w.state.task = engine_->classify(w.state.turns.back().text, transcript_.get());
    advance(w, Event::classified);
  }
  auto outcome = continue_task(w);
  commit(std::move(w));
  return outcome;
}

TurnOutcome Consultation::continue_task(Work& w) const {
  if (w.state.phase == Phase::inquiring) {
    auto step_result = engine_->next_inquiry(w.state, options_.history_memory, w.state.started_at,
                                             transcript_.get());
    if (auto* q = std::get_if<InquiryStep>(&step_result)) {
      auto at = std::max(clock_(), w.state.turns.back().at);
      w.state.turns.push_back({Speaker::copilot, q->question, at});
      advance(w, Event::inquiry_question_emitted);
      return {OutcomeKind::question, q->question};
    }
    advance(w, Event::inquiry_done);
  }
  return answer_and_gate(w);
}

TurnOutcome Consultation::answer_and_gate(Work& w) const {
  const auto task = *w.state.task;
  std::string snippets;
  if (task != TaskKind::diagnosis && options_.search) {
    snippets = options_.search(w.state.turns[w.state.opener.value_or(0)].text);
  }
  PendingResponse pending;
  pending.raw = engine_->answer(w.state, options_.history_memory, snippets, w.state.started_at,
                                transcript_.get());
  if (trim(pending.raw).empty()) throw BackendRefusal("answer stage returned empty output");
  w.state.pending = pending;
  advance(w, Event::raw_ready);

  auto enabled = engine_->config().safety_enabled.find(task);
  if (enabled == engine_->config().safety_enabled.end() || enabled->second) {
    auto safe = engine_->safety_pass(w.state.pending->raw, transcript_.get());
    w.state.pending->safe = std::move(safe.text);
    w.state.pending->safety_flagged = safe.flagged;
    w.audit.emplace_back("safety_pass");
  } else {
    w.state.pending->safe = w.state.pending->raw;
    w.audit.emplace_back("safety_skipped");
  }
  advance(w, Event::safety_done);

  if (options_.doctor_attached) {
    return {OutcomeKind::review_pending, *w.state.pending->safe};
  }
  return {OutcomeKind::reply, finish(w, DoctorAction::approve())};
}

std::string Consultation::finish(Work& w, const DoctorAction& action) const {
  auto final_text = engine_->apply_doctor(*w.state.pending, action, transcript_.get());
  w.audit.push_back("apply_doctor:" + std::string(to_string(action.kind)));
  w.state.pending->final_text = final_text;
  advance(w, Event::doctor_done);

  auto at = std::max(clock_(), w.state.turns.back().at);
  w.state.turns.push_back({Speaker::copilot, final_text, at});
  advance(w, Event::release);
  w.audit.emplace_back("release");
  return final_text;
}

std::string Consultation::resolve_review(const DoctorAction& action) {
  if (state_.phase != Phase::doctor_review || !state_.pending ||
      state_.pending->final_text.has_value()) {
    throw IllegalTransition("no response is awaiting doctor review");
  }
  Work w{state_, trace_, audit_};
  auto text = finish(w, action);
  commit(std::move(w));
  return text;
}

void Consultation::close() {
  Work w{state_, trace_, audit_};
  advance(w, Event::close);
  commit(std::move(w));
}

}  // namespace copilot
