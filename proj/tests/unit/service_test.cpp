#include <gtest/gtest.h>

#include "copilot/service.hpp"
#include "test_support.hpp"

namespace copilot {
namespace {

using test::any;
using test::rule;

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 0;
}

struct Harness {
  test::TempDir dir;
  std::shared_ptr<ScriptedBackend> backend = test::scripted(test::headache_script());
  std::shared_ptr<Timestamp> now = std::make_shared<Timestamp>(make_timestamp(2024, 2, 8, 20));
  ServiceConfig cfg;

  Harness() { cfg.data_dir = dir / "data"; }

  std::unique_ptr<CopilotService> make() {
    ServiceDeps deps{test::client(backend)};
    deps.clock = [t = now] { return *t; };
    return std::make_unique<CopilotService>(cfg, test::prompts(), std::move(deps));
  }
};

void consult(CopilotService& svc, const std::string& id) {
  EXPECT_EQ(svc.post_message(id, test::kHeadacheOpener).kind, OutcomeKind::question);
  EXPECT_EQ(svc.post_message(id, test::kHeadacheReply1).kind, OutcomeKind::question);
}

TEST(Service, FullLifecycle) {
  Harness h;
  auto svc = h.make();
  const auto id = svc->create_session("patient-1").session_id;
  consult(*svc, id);
  const auto answer = svc->post_message(id, test::kHeadacheReply2);
  EXPECT_EQ(answer.kind, OutcomeKind::reply);
  EXPECT_NE(answer.text.find("migraine"), std::string::npos);

  auto view = svc->session_view(id);
  EXPECT_EQ(view["phase"], "awaiting_input");
  EXPECT_EQ(view["turns"].size(), 6u);
  EXPECT_EQ(view["busy"], false);
  EXPECT_EQ(view["inquiry_round"], 2);

  const auto closed = svc->close_session(id);
  EXPECT_EQ(closed.report.diagnosis, "Migraine.");
  EXPECT_EQ(closed.memory_record.summary.rfind("Date: 2024/02/08 20:00", 0), 0u);
  EXPECT_TRUE(std::filesystem::exists(h.dir / "data" / "reports" / (id + ".txt")));
  EXPECT_TRUE(std::filesystem::exists(h.dir / "data" / "reports" / (id + ".json")));
  EXPECT_EQ(svc->history("patient-1").records.size(), 1u);
  EXPECT_EQ(svc->session_view(id)["closed"], true);
  EXPECT_EQ(status_of([&] { svc->post_message(id, "more"); }), 409);
  EXPECT_EQ(status_of([&] { svc->close_session(id); }), 409);
}

TEST(Service, RequestErrors) {
  Harness h;
  auto svc = h.make();
  EXPECT_EQ(status_of([&] { svc->create_session(""); }), 400);
  EXPECT_EQ(status_of([&] { svc->create_session("../etc"); }), 400);
  EXPECT_EQ(status_of([&] { svc->session_view("nope"); }), 404);
  EXPECT_EQ(status_of([&] { svc->post_message("nope", "hi"); }), 404);
  EXPECT_EQ(status_of([&] { svc->history("nobody"); }), 404);
  const auto id = svc->create_session("p").session_id;
  EXPECT_EQ(status_of([&] { svc->post_message(id, "  "); }), 400);
  EXPECT_EQ(status_of([&] { svc->close_session(id); }), 409);
  EXPECT_EQ(status_of([&] { svc->act_on_review("missing", DoctorAction::approve()); }), 404);

  svc->post_message(id, test::kHeadacheOpener);
  EXPECT_EQ(status_of([&] { svc->close_session(id); }), 409);  // mid-inquiry
}

TEST(Service, BackendFailureIs502AndLeavesSession) {
  Harness h;
  h.backend = test::scripted({any("classify", "medical diagnosis task")});
  auto svc = h.make();
  const auto id = svc->create_session("p").session_id;
  const auto before = svc->session_view(id);
  EXPECT_EQ(status_of([&] { svc->post_message(id, "It hurts."); }), 502);
  EXPECT_EQ(svc->session_view(id), before);
}

TEST(Service, DoctorReviewQueue) {
  Harness h;
  h.cfg.doctor.attached = true;
  auto svc = h.make();
  const auto id = svc->create_session("p").session_id;
  consult(*svc, id);
  const auto held = svc->post_message(id, test::kHeadacheReply2);
  EXPECT_EQ(held.kind, OutcomeKind::review_pending);
  ASSERT_EQ(svc->open_reviews().size(), 1u);
  const auto review = svc->open_reviews()[0];
  EXPECT_EQ(review.safe_text, held.text);
  const auto queue = svc->review_queue();
  ASSERT_EQ(queue.size(), 1u);
  EXPECT_EQ(queue[0]["session_id"], id);
  EXPECT_EQ(svc->session_view(id)["phase"], "doctor_review");
  EXPECT_EQ(status_of([&] { svc->post_message(id, "hello?"); }), 409);
  EXPECT_EQ(status_of([&] { svc->close_session(id); }), 409);

  const auto released = svc->act_on_review(review.review_id, DoctorAction::guide("Mention ibuprofen."));
  EXPECT_NE(released.find("Ibuprofen"), std::string::npos);
  EXPECT_TRUE(svc->open_reviews().empty());
  EXPECT_EQ(status_of([&] { svc->act_on_review(review.review_id, DoctorAction::approve()); }), 409);
  const auto audit = svc->audit(id);
  EXPECT_NE(std::find(audit.begin(), audit.end(), "apply_doctor:guide"), audit.end());
  EXPECT_EQ(svc->session_view(id)["turns"].back()["text"], released);
}

TEST(Service, AutoApproveSweep) {
  Harness h;
  h.cfg.doctor.attached = true;
  h.cfg.doctor.auto_approve_after = std::chrono::seconds(60);
  auto svc = h.make();
  const auto id = svc->create_session("p").session_id;
  consult(*svc, id);
  const auto held = svc->post_message(id, test::kHeadacheReply2);
  *h.now += std::chrono::seconds(30);
  EXPECT_EQ(svc->sweep_auto_approve(), 0u);
  *h.now += std::chrono::seconds(31);
  EXPECT_EQ(svc->sweep_auto_approve(), 1u);
  EXPECT_EQ(svc->session_view(id)["phase"], "awaiting_input");
  EXPECT_EQ(svc->session_view(id)["turns"].back()["text"], held.text);
  EXPECT_EQ(svc->sweep_auto_approve(), 0u);
}

TEST(Service, RecoversSessionsFromDisk) {
  Harness h;
  std::string id;
  nlohmann::json view;
  {
    auto svc = h.make();
    id = svc->create_session("p").session_id;
    consult(*svc, id);
    view = svc->session_view(id);
  }
  auto svc = h.make();
  EXPECT_EQ(svc->session_count(), 1u);
  EXPECT_EQ(svc->session_view(id), view);
  const auto snapshot = read_session_snapshot(h.cfg.data_dir, id);
  ASSERT_TRUE(snapshot);
  EXPECT_EQ(snapshot->phase, Phase::inquiring);
  EXPECT_EQ(svc->post_message(id, test::kHeadacheReply2).kind, OutcomeKind::reply);
  EXPECT_FALSE(read_session_snapshot(h.cfg.data_dir, "other"));
}

TEST(Service, RecoveryDropsUnacknowledgedLogTail) {
  Harness h;
  std::string id;
  {
    auto svc = h.make();
    id = svc->create_session("p").session_id;
    consult(*svc, id);
  }
  // A turn appended to the log whose snapshot never landed.
  TranscriptLog log(h.cfg.data_dir / "transcripts");
  log.append(id, {Speaker::patient, "lost message", make_timestamp(2024, 2, 8, 20)});
  auto svc = h.make();
  EXPECT_EQ(svc->session_view(id)["turns"].size(), 4u);
  EXPECT_EQ(log.load(id).size(), 4u);
}

}  // namespace
}  // namespace copilot
