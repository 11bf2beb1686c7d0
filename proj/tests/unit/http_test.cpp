#include <gtest/gtest.h>
#include <httplib.h>

#include <thread>

#include "copilot/http_server.hpp"
#include "test_support.hpp"

namespace copilot {
namespace {

using json = nlohmann::json;

class Running {
 public:
  Running(ServiceConfig cfg, std::string token)
      : backend_(test::scripted(test::headache_script())),
        service_(std::move(cfg), test::prompts(), ServiceDeps{test::client(backend_)}),
        server_(service_, std::move(token), std::chrono::milliseconds(50)) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.listen(); });
  }
  ~Running() {
    server_.stop();
    thread_.join();
  }

  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

 private:
  std::shared_ptr<ScriptedBackend> backend_;
  CopilotService service_;
  HttpServer server_;
  int port_ = 0;
  std::thread thread_;
};

json post(httplib::Client& c, const std::string& path, const json& body, int status,
          const httplib::Headers& headers = {}) {
  auto res = c.Post(path, headers, body.dump(), "application/json");
  EXPECT_TRUE(res);
  if (!res) return {};
  EXPECT_EQ(res->status, status) << path << ": " << res->body;
  return json::parse(res->body);
}

json get(httplib::Client& c, const std::string& path, int status, const httplib::Headers& headers = {}) {
  auto res = c.Get(path, headers);
  EXPECT_TRUE(res);
  if (!res) return {};
  EXPECT_EQ(res->status, status) << path << ": " << res->body;
  return json::parse(res->body);
}

TEST(Http, SessionRoutes) {
  test::TempDir dir;
  ServiceConfig cfg;
  cfg.data_dir = dir / "data";
  Running r(cfg, "");
  auto c = r.client();
  EXPECT_EQ(get(c, "/health", 200)["status"], "ok");

  const auto created = post(c, "/sessions", {{"patient_id", "p1"}}, 201);
  const std::string id = created["session_id"];
  EXPECT_EQ(created["phase"], "awaiting_input");
  const std::string base = "/sessions/" + id;

  EXPECT_EQ(post(c, base + "/messages", {{"text", test::kHeadacheOpener}}, 200)["type"], "question");
  post(c, base + "/messages", {{"text", test::kHeadacheReply1}}, 200);
  const auto answer = post(c, base + "/messages", {{"text", test::kHeadacheReply2}}, 200);
  EXPECT_EQ(answer["type"], "reply");
  EXPECT_EQ(get(c, base, 200)["turns"].size(), 6u);

  const auto closed = post(c, base + "/close", json::object(), 200);
  EXPECT_EQ(closed["report"]["diagnosis"], "Migraine.");
  EXPECT_NE(closed["report_text"].get<std::string>().find("Diagnosis:"), std::string::npos);
  EXPECT_EQ(get(c, "/patients/p1/history", 200)["records"].size(), 1u);

  EXPECT_EQ(post(c, base + "/messages", {{"text", "again"}}, 409).count("error"), 1u);
  get(c, "/sessions/unknown", 404);
  get(c, "/patients/nobody/history", 404);
  post(c, "/sessions", json::object(), 400);
  auto bad = c.Post("/sessions", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
}

TEST(Http, ReviewNeedsToken) {
  test::TempDir dir;
  ServiceConfig cfg;
  cfg.data_dir = dir / "data";
  cfg.doctor.attached = true;
  Running r(cfg, "s3cret");
  auto c = r.client();
  const std::string id = post(c, "/sessions", {{"patient_id", "p"}}, 201)["session_id"];
  const std::string base = "/sessions/" + id + "/messages";
  post(c, base, {{"text", test::kHeadacheOpener}}, 200);
  post(c, base, {{"text", test::kHeadacheReply1}}, 200);
  EXPECT_EQ(post(c, base, {{"text", test::kHeadacheReply2}}, 200)["type"], "review_pending");

  get(c, "/review", 401);
  get(c, "/review", 401, {{"Authorization", "Bearer wrong"}});
  const httplib::Headers auth{{"Authorization", "Bearer s3cret"}};
  const auto queue = get(c, "/review", 200, auth);
  ASSERT_EQ(queue.size(), 1u);
  const std::string review = queue[0]["review_id"];

  post(c, "/review/" + review, {{"action", "approve"}}, 401);
  post(c, "/review/" + review, {{"action", "shrug"}}, 400, auth);
  const auto done = post(c, "/review/" + review, {{"action", "edit"}, {"text", "Edited answer."}},
                         200, auth);
  EXPECT_EQ(done["released"], "Edited answer.");
  post(c, "/review/" + review, {{"action", "approve"}}, 409, auth);
  EXPECT_TRUE(get(c, "/review", 200, auth).empty());
}

}  // namespace
}  // namespace copilot
