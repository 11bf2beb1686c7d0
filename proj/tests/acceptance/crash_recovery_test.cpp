// Kills a running `copilot serve` while it is answering, restarts it on the
// same data directory and checks the session picks up where it was.

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "copilot/storage.hpp"
#include "test_support.hpp"

extern char** environ;

namespace copilot {
namespace {

using json = nlohmann::json;

// Chat-completions endpoint that routes on prompt content and can hold the
// diagnosis call open until released.
class FakeModel {
 public:
  FakeModel() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      const auto prompt = body["messages"].back()["content"].get<std::string>();
      res.set_content(reply_json(respond(prompt)).dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
  }

  ~FakeModel() {
    release();
    server_.stop();
    thread_.join();
  }

  int port() const { return port_; }

  void hold_diagnosis() {
    std::lock_guard lock(mu_);
    holding_ = true;
  }

  void release() {
    {
      std::lock_guard lock(mu_);
      holding_ = false;
    }
    cv_.notify_all();
  }

  bool wait_for_diagnosis(std::chrono::seconds timeout) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [this] { return diagnosis_started_ > 0; });
  }

  int diagnosis_calls() const { return diagnosis_started_.load(); }

 private:
  static json reply_json(const std::string& content) {
    return {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}},
                                      {"finish_reason", "stop"}}})},
            {"usage", {{"prompt_tokens", 10}, {"completion_tokens", 5}}}};
  }

  std::string respond(const std::string& prompt) {
    if (prompt.find("identify the type of medical task") != std::string::npos) {
      return "medical diagnosis task";
    }
    if (prompt.find("propose some key follow-up questions") != std::string::npos) {
      return prompt.find("Patient: It started two days ago.") != std::string::npos
                 ? "Questioning is over"
                 : "When did the headache start?";
    }
    if (prompt.find("propose a preliminary diagnosis") != std::string::npos) {
      std::unique_lock lock(mu_);
      ++diagnosis_started_;
      cv_.notify_all();
      cv_.wait_for(lock, std::chrono::seconds(30), [this] { return !holding_; });
      return "This is most likely a tension headache. Rest and drink water.";
    }
    if (prompt.find("safety supervisor") != std::string::npos) {
      return "This advice is AI-generated. This is most likely a tension headache. Rest and drink "
             "water.";
    }
    return "OK";
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
  bool holding_ = false;
  std::atomic<int> diagnosis_started_{0};
};

class ServiceProcess {
 public:
  explicit ServiceProcess(const std::string& config) {
    int fds[2];
    if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, fds[0]);
    std::vector<std::string> args = {COPILOT_CLI_PATH, "--config", config, "serve", "--port", "0"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    const int rc = posix_spawn(&pid_, COPILOT_CLI_PATH, &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(fds[1]);
    if (rc != 0) {
      close(fds[0]);
      throw std::runtime_error("cannot spawn " + std::string(COPILOT_CLI_PATH));
    }
    // First stdout line: "listening on host:port".
    std::string line;
    char c = 0;
    while (read(fds[0], &c, 1) == 1 && c != '\n') line += c;
    close(fds[0]);
    const auto colon = line.rfind(':');
    if (line.rfind("listening on ", 0) != 0 || colon == std::string::npos) {
      kill();
      throw std::runtime_error("unexpected service output: '" + line + "'");
    }
    port_ = std::stoi(line.substr(colon + 1));
  }

  ~ServiceProcess() { kill(); }

  int port() const { return port_; }

  void kill() {
    if (pid_ <= 0) return;
    ::kill(pid_, SIGKILL);
    int status = 0;
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }

 private:
  pid_t pid_ = -1;
  int port_ = 0;
};

json get_json(httplib::Client& cli, const std::string& path) {
  auto res = cli.Get(path);
  if (!res) throw std::runtime_error("GET " + path + " failed");
  EXPECT_EQ(res->status, 200) << res->body;
  return json::parse(res->body);
}

json post_json(httplib::Client& cli, const std::string& path, const json& body, int status = 200) {
  auto res = cli.Post(path, body.dump(), "application/json");
  if (!res) throw std::runtime_error("POST " + path + " failed");
  EXPECT_EQ(res->status, status) << res->body;
  return json::parse(res->body);
}

std::vector<std::pair<std::string, std::string>> turns_of(const json& view) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& t : view["turns"]) out.emplace_back(t["role"], t["text"]);
  return out;
}

TEST(Acceptance, crash_recovery) {
  test::TempDir dir;
  FakeModel model;
  const json backend{{"kind", "http"},
                     {"endpoint", "http://127.0.0.1:" + std::to_string(model.port()) + "/v1"},
                     {"model", "fake"},
                     {"timeout_ms", 60000}};
  const json cfg{{"backends", {{"copilot", backend}}},
                 {"data_dir", (dir / "data").string()},
                 {"retry", {{"max_retries", 0}, {"base_backoff_ms", 0}}}};
  const auto config = dir / "config.json";
  test::write_text(config, cfg.dump(2));

  const std::vector<std::pair<std::string, std::string>> persisted = {
      {"patient", "I have a headache."}, {"copilot", "When did the headache start?"}};
  std::string session;
  {
    ServiceProcess first(config.string());
    httplib::Client cli("127.0.0.1", first.port());
    session = post_json(cli, "/sessions", {{"patient_id", "p1"}}, 201)["session_id"];
    const auto q = post_json(cli, "/sessions/" + session + "/messages", {{"text", "I have a headache."}});
    ASSERT_EQ(q["type"], "question");

    // The reply ends the inquiry; kill the service while the answer is being written.
    model.hold_diagnosis();
    std::thread inflight([&] {
      httplib::Client c("127.0.0.1", first.port());
      c.set_read_timeout(std::chrono::seconds(60));
      (void)c.Post("/sessions/" + session + "/messages",
                   json{{"text", "It started two days ago."}}.dump(), "application/json");
    });
    ASSERT_TRUE(model.wait_for_diagnosis(std::chrono::seconds(20)));
    first.kill();
    inflight.join();
  }
  model.release();

  ServiceProcess second(config.string());
  httplib::Client cli("127.0.0.1", second.port());
  auto view = get_json(cli, "/sessions/" + session);
  EXPECT_EQ(view["phase"], "inquiring");
  EXPECT_EQ(view["busy"], false);
  EXPECT_EQ(turns_of(view), persisted);
  TranscriptLog log(dir / "data" / "transcripts");
  EXPECT_EQ(log.load(session).size(), persisted.size());

  const auto answer =
      post_json(cli, "/sessions/" + session + "/messages", {{"text", "It started two days ago."}});
  EXPECT_EQ(answer["type"], "reply");
  EXPECT_EQ(answer["text"],
            "This advice is AI-generated. This is most likely a tension headache. Rest and drink "
            "water.");

  view = get_json(cli, "/sessions/" + session);
  EXPECT_EQ(view["phase"], "awaiting_input");
  auto expected = persisted;
  expected.emplace_back("patient", "It started two days ago.");
  expected.emplace_back("copilot", answer["text"]);
  EXPECT_EQ(turns_of(view), expected);
  const auto logged = log.load(session);
  ASSERT_EQ(logged.size(), expected.size());
  for (std::size_t i = 0; i < logged.size(); ++i) EXPECT_EQ(logged[i].text, expected[i].second);
  EXPECT_EQ(model.diagnosis_calls(), 2);
}

}  // namespace
}  // namespace copilot
