#include "copilot/service.hpp"

#include <fstream>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "copilot/errors.hpp"
#include "text.hpp"

namespace copilot {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct CopilotService::Slot {
  std::mutex mu;
  bool busy = false;
  bool closed = false;
  /// Touched only by the thread that set `busy`.
  std::unique_ptr<Consultation> consult;
  std::size_t logged_turns = 0;
  /// Published copies, read under `mu`.
  SessionState view;
  std::optional<ReviewItem> review;
  std::vector<std::string> audit;
};

namespace {

// Marks a slot busy for the lifetime of the guard; 409 if it already is.
class BusyGuard {
 public:
  explicit BusyGuard(std::mutex& mu, bool& busy) : mu_(mu), busy_(busy) {
    std::lock_guard lock(mu_);
    if (busy_) throw ServiceError(409, "another request is in progress for this session");
    busy_ = true;
  }
  ~BusyGuard() {
    std::lock_guard lock(mu_);
    busy_ = false;
  }
  BusyGuard(const BusyGuard&) = delete;
  BusyGuard& operator=(const BusyGuard&) = delete;

 private:
  std::mutex& mu_;
  bool& busy_;
};

int status_for(const std::exception& e) {
  if (auto* s = dynamic_cast<const ServiceError*>(&e)) return s->status();
  if (dynamic_cast<const IllegalTransition*>(&e)) return 409;
  if (dynamic_cast<const PreconditionError*>(&e)) return 400;
  if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const AuthError*>(&e) ||
      dynamic_cast<const BackendRefusal*>(&e) || dynamic_cast<const UnscriptedRequest*>(&e) ||
      dynamic_cast<const MalformedReport*>(&e) || dynamic_cast<const Unclassifiable*>(&e) ||
      dynamic_cast<const MalformedInquiry*>(&e)) {
    return 502;
  }
  return 500;
}

template <class F>
auto mapped(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ServiceError&) {
    throw;
  } catch (const std::exception& e) {
    throw ServiceError(status_for(e), e.what());
  }
}

ReviewStatus status_for(DoctorAction::Kind k) {
  switch (k) {
    case DoctorAction::Kind::approve: return ReviewStatus::approved;
    case DoctorAction::Kind::direct_edit: return ReviewStatus::edited;
    case DoctorAction::Kind::guidance: return ReviewStatus::guided;
  }
  return ReviewStatus::approved;
}

std::optional<ReviewStatus> review_status_from_string(std::string_view s) {
  for (auto st : {ReviewStatus::open, ReviewStatus::approved, ReviewStatus::edited,
                  ReviewStatus::guided}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

ReviewItem review_from_json(const json& j) {
  ReviewItem r;
  r.review_id = j.at("review_id").get<std::string>();
  r.session_id = j.at("session_id").get<std::string>();
  r.safe_text = j.at("safe_text").get<std::string>();
  r.created_at = parse_timestamp(j.at("created_at").get<std::string>()).value_or(Timestamp{});
  r.status = review_status_from_string(j.at("status").get<std::string>()).value_or(ReviewStatus::open);
  r.auto_approved = j.value("auto_approved", false);
  return r;
}

json turns_json(const std::vector<ChatTurn>& turns) {
  json out = json::array();
  for (const auto& t : turns) out.push_back(to_json(t));
  return out;
}

}  // namespace

std::string_view to_string(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::open: return "open";
    case ReviewStatus::approved: return "approved";
    case ReviewStatus::edited: return "edited";
    case ReviewStatus::guided: return "guided";
  }
  return "open";
}

json to_json(const ReviewItem& r) {
  return {{"review_id", r.review_id},
          {"session_id", r.session_id},
          {"safe_text", r.safe_text},
          {"created_at", format_iso8601(r.created_at)},
          {"status", to_string(r.status)},
          {"auto_approved", r.auto_approved}};
}

std::optional<SessionState> read_session_snapshot(const fs::path& data_dir,
                                                  const std::string& session_id) {
  check_file_id(session_id);
  std::ifstream in(data_dir / "sessions" / (session_id + ".json"));
  if (!in) return std::nullopt;
  const auto doc = json::parse(in);
  return session_from_json(doc.at("state"));
}

CopilotService::CopilotService(ServiceConfig config, const PromptLibrary& prompts, ServiceDeps deps)
    : config_(std::move(config)),
      prompts_(&prompts),
      deps_(std::move(deps)),
      engine_(deps_.copilot, prompts, config_.engine),
      sessions_dir_(config_.data_dir / "sessions"),
      reports_dir_(config_.data_dir / "reports"),
      histories_(config_.data_dir / "histories"),
      transcripts_(config_.data_dir / "transcripts") {
  if (!deps_.search) deps_.search = make_null_search();
  recover();
}

CopilotService::~CopilotService() = default;

ConsultationOptions CopilotService::options_for(const SessionState& state) const {
  ConsultationOptions o;
  o.doctor_attached = config_.doctor.attached;
  if (histories_.exists(state.patient_id)) {
    o.history_memory = render_clinical_record(histories_.load(state.patient_id));
  }
  auto provider = deps_.search;
  o.search = [provider](std::string_view q) { return search_snippets(*provider, q); };
  return o;
}

void CopilotService::recover() {
  std::error_code ec;
  if (!fs::is_directory(sessions_dir_, ec)) return;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(sessions_dir_, ec)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    try {
      std::ifstream in(file);
      const auto doc = json::parse(in);
      auto slot = std::make_shared<Slot>();
      slot->view = session_from_json(doc.at("state"));
      slot->closed = doc.value("closed", false);
      const auto& id = slot->view.session_id;

      // The snapshot is authoritative; bring the turn log in line with it.
      std::vector<ChatTurn> logged;
      try {
        logged = transcripts_.load(id);
      } catch (const FormatError&) {
        logged.clear();
      }
      const auto& turns = slot->view.turns;
      const bool prefix = logged.size() <= turns.size() &&
                          std::equal(logged.begin(), logged.end(), turns.begin());
      if (!prefix) {
        transcripts_.replace(id, turns);
      } else {
        for (auto i = logged.size(); i < turns.size(); ++i) transcripts_.append(id, turns[i]);
      }
      slot->logged_turns = turns.size();

      if (doc.contains("review") && !doc["review"].is_null()) slot->review = review_from_json(doc["review"]);
      if (slot->view.phase == Phase::doctor_review &&
          (!slot->review || slot->review->status != ReviewStatus::open)) {
        slot->review = ReviewItem{id + "-r" + std::to_string(turns.size()), id,
                                  slot->view.pending->safe.value_or(slot->view.pending->raw),
                                  deps_.clock(), ReviewStatus::open, false};
      }
      slot->consult = std::make_unique<Consultation>(engine_, slot->view, options_for(slot->view),
                                                     deps_.clock);
      if (slot->review) review_index_[slot->review->review_id] = id;
      sessions_[id] = std::move(slot);
      spdlog::info("recovered session {} in phase {}", id, to_string(sessions_[id]->view.phase));
    } catch (const std::exception& e) {
      spdlog::warn("skipping unreadable session snapshot {}: {}", file.string(), e.what());
    }
  }
}

std::string CopilotService::new_session_id() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  for (;;) {
    auto id = fmt::format("{:016x}", rng());
    std::lock_guard lock(mu_);
    if (!sessions_.contains(id) && !fs::exists(sessions_dir_ / (id + ".json"))) return id;
  }
}

void CopilotService::persist(Slot& slot, const SessionState& state, std::size_t logged_turns) {
  json doc;
  doc["state"] = to_json(state);
  doc["closed"] = slot.closed;
  doc["review"] = slot.review ? to_json(*slot.review) : json(nullptr);
  atomic_write(sessions_dir_ / (state.session_id + ".json"), doc.dump(2));
  for (auto i = logged_turns; i < state.turns.size(); ++i) {
    transcripts_.append(state.session_id, state.turns[i]);
  }
}

std::shared_ptr<CopilotService::Slot> CopilotService::find(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + session_id + "'");
  return it->second;
}

std::size_t CopilotService::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

SessionState CopilotService::create_session(const std::string& patient_id) {
  if (trim(patient_id).empty()) throw ServiceError(400, "patient_id is required");
  try {
    check_file_id(patient_id);
  } catch (const PreconditionError& e) {
    throw ServiceError(400, e.what());
  }
  SessionState state;
  state.session_id = new_session_id();
  state.patient_id = patient_id;
  state.started_at = deps_.clock();
  state.phase = Phase::awaiting_input;

  auto slot = std::make_shared<Slot>();
  slot->view = state;
  mapped([&] {
    persist(*slot, state, 0);
    transcripts_.replace(state.session_id, {});
    slot->consult = std::make_unique<Consultation>(engine_, state, options_for(state), deps_.clock);
    return 0;
  });
  std::lock_guard lock(mu_);
  sessions_[state.session_id] = std::move(slot);
  return state;
}

json CopilotService::session_view(const std::string& session_id) const {
  auto slot = find(session_id);
  std::lock_guard lock(slot->mu);
  const auto& s = slot->view;
  json j;
  j["session_id"] = s.session_id;
  j["patient_id"] = s.patient_id;
  j["started_at"] = format_iso8601(s.started_at);
  j["phase"] = to_string(s.phase);
  j["closed"] = slot->closed;
  j["busy"] = slot->busy;
  j["task"] = s.task ? json(to_string(*s.task)) : json(nullptr);
  j["inquiry_round"] = s.inquiry_round;
  j["turns"] = turns_json(s.turns);
  j["review"] = slot->review ? to_json(*slot->review) : json(nullptr);
  return j;
}

TurnOutcome CopilotService::post_message(const std::string& session_id, const std::string& text) {
  if (trim(text).empty()) throw ServiceError(400, "text is required");
  auto slot = find(session_id);
  BusyGuard guard(slot->mu, slot->busy);
  SessionState before;
  {
    std::lock_guard lock(slot->mu);
    if (slot->closed) throw ServiceError(409, "session is closed");
    if (slot->view.phase == Phase::doctor_review) {
      throw ServiceError(409, "the previous answer is awaiting doctor review");
    }
    before = slot->view;
  }

  auto outcome = mapped([&] {
    slot->consult->set_history_memory(options_for(before).history_memory);
    return slot->consult->on_patient_message(text);
  });
  const auto& state = slot->consult->state();

  std::optional<ReviewItem> item;
  if (outcome.kind == OutcomeKind::review_pending) {
    item = ReviewItem{session_id + "-r" + std::to_string(state.turns.size()), session_id,
                      outcome.text, deps_.clock(), ReviewStatus::open, false};
  }
  auto previous_review = slot->review;
  if (item) slot->review = item;
  try {
    persist(*slot, state, slot->logged_turns);
  } catch (const std::exception& e) {
    // Roll the in-memory session back to the last persisted state.
    slot->review = previous_review;
    slot->consult = std::make_unique<Consultation>(engine_, before, options_for(before), deps_.clock);
    throw ServiceError(500, std::string("cannot persist session: ") + e.what());
  }
  slot->logged_turns = state.turns.size();
  {
    std::lock_guard lock(slot->mu);
    slot->view = state;
    slot->audit = slot->consult->audit();
  }
  if (item) {
    std::lock_guard lock(mu_);
    review_index_[item->review_id] = session_id;
  }
  return outcome;
}

std::vector<ReviewItem> CopilotService::open_reviews() const {
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::lock_guard lock(mu_);
    for (const auto& [_, s] : sessions_) slots.push_back(s);
  }
  std::vector<ReviewItem> out;
  for (const auto& s : slots) {
    std::lock_guard lock(s->mu);
    if (s->review && s->review->status == ReviewStatus::open) out.push_back(*s->review);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.created_at, a.review_id) < std::tie(b.created_at, b.review_id);
  });
  return out;
}

json CopilotService::review_queue() const {
  json out = json::array();
  for (const auto& item : open_reviews()) {
    auto slot = find(item.session_id);
    SessionState view;
    {
      std::lock_guard lock(slot->mu);
      view = slot->view;
    }
    auto j = to_json(item);
    j["patient_id"] = view.patient_id;
    j["raw_text"] = view.pending ? json(view.pending->raw) : json(nullptr);
    j["safety_flagged"] = view.pending ? view.pending->safety_flagged : false;
    j["transcript"] = turns_json(view.turns);
    j["history"] = histories_.exists(view.patient_id)
                       ? render_clinical_record(histories_.load(view.patient_id))
                       : std::string();
    out.push_back(std::move(j));
  }
  return out;
}

std::string CopilotService::act_on_review(const std::string& review_id, const DoctorAction& action) {
  try {
    action.validate();
  } catch (const PreconditionError& e) {
    throw ServiceError(400, e.what());
  }
  std::string session_id;
  {
    std::lock_guard lock(mu_);
    auto it = review_index_.find(review_id);
    if (it == review_index_.end()) throw ServiceError(404, "unknown review item '" + review_id + "'");
    session_id = it->second;
  }
  auto slot = find(session_id);
  BusyGuard guard(slot->mu, slot->busy);
  {
    std::lock_guard lock(slot->mu);
    if (!slot->review || slot->review->review_id != review_id ||
        slot->review->status != ReviewStatus::open) {
      throw ServiceError(409, "review item '" + review_id + "' has already been acted on");
    }
  }

  auto text = mapped([&] { return slot->consult->resolve_review(action); });
  const auto& state = slot->consult->state();
  auto previous_review = slot->review;
  slot->review->status = status_for(action.kind);
  try {
    persist(*slot, state, slot->logged_turns);
  } catch (const std::exception& e) {
    SessionState before;
    {
      std::lock_guard lock(slot->mu);
      before = slot->view;
    }
    slot->review = previous_review;
    slot->consult = std::make_unique<Consultation>(engine_, before, options_for(before), deps_.clock);
    throw ServiceError(500, std::string("cannot persist session: ") + e.what());
  }
  slot->logged_turns = state.turns.size();
  std::lock_guard lock(slot->mu);
  slot->view = state;
  slot->audit = slot->consult->audit();
  return text;
}

std::size_t CopilotService::sweep_auto_approve() {
  if (!config_.doctor.auto_approve_after) return 0;
  const auto now = deps_.clock();
  std::size_t approved = 0;
  for (const auto& item : open_reviews()) {
    if (now - item.created_at < *config_.doctor.auto_approve_after) continue;
    try {
      act_on_review(item.review_id, DoctorAction::approve());
      auto slot = find(item.session_id);
      std::lock_guard lock(slot->mu);
      if (slot->review && slot->review->review_id == item.review_id) slot->review->auto_approved = true;
      ++approved;
    } catch (const ServiceError& e) {
      spdlog::debug("auto-approve of {} skipped: {}", item.review_id, e.what());
    }
  }
  return approved;
}

CloseResult CopilotService::close_session(const std::string& session_id) {
  auto slot = find(session_id);
  BusyGuard guard(slot->mu, slot->busy);
  SessionState view;
  {
    std::lock_guard lock(slot->mu);
    if (slot->closed) throw ServiceError(409, "session is already closed");
    if (slot->view.turns.empty()) throw ServiceError(409, "session has no exchange to close");
    if (slot->view.phase != Phase::awaiting_input) {
      throw ServiceError(409, std::string("session is mid-turn (phase ") +
                                  std::string(to_string(slot->view.phase)) + ")");
    }
    view = slot->view;
  }

  CloseResult result = mapped([&] {
    const auto& client = engine_.client();
    const auto transcript = serialize_turns(view.turns);
    const auto now = deps_.clock();
    CloseResult r;
    r.report = generate_report(client, *prompts_, transcript, now, config_.report_headings,
                               &slot->consult->transcript());
    r.memory_record = summarize_consultation(client, *prompts_, transcript, now,
                                             &slot->consult->transcript());
    {
      auto lock = histories_.lock(view.patient_id);
      auto history = histories_.load(view.patient_id);
      histories_.save(update_history(client, *prompts_, history, r.memory_record, now,
                                     config_.retention, &slot->consult->transcript()));
    }
    atomic_write(reports_dir_ / (session_id + ".txt"), format_report(r.report));
    atomic_write(reports_dir_ / (session_id + ".json"), to_json(r.report).dump(2));
    return r;
  });

  mapped([&] {
    slot->consult->close();
    slot->closed = true;
    persist(*slot, slot->consult->state(), slot->logged_turns);
    return 0;
  });
  std::lock_guard lock(slot->mu);
  slot->view = slot->consult->state();
  slot->audit = slot->consult->audit();
  return result;
}

PatientHistory CopilotService::history(const std::string& patient_id) const {
  return mapped([&] {
    if (!histories_.exists(patient_id)) {
      throw ServiceError(404, "no history for patient '" + patient_id + "'");
    }
    return histories_.load(patient_id);
  });
}

std::vector<std::string> CopilotService::audit(const std::string& session_id) const {
  auto slot = find(session_id);
  std::lock_guard lock(slot->mu);
  return slot->audit;
}

}  // namespace copilot
