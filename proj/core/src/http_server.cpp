#include "copilot/http_server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <condition_variable>
#include <thread>

#include "copilot/errors.hpp"

namespace copilot {

using json = nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw ServiceError(400, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ServiceError(400, std::string("request body is not valid JSON: ") + e.what());
  }
}

std::string string_field(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string()) return {};
  return body[key].get<std::string>();
}

template <class F>
httplib::Server::Handler wrap(F f) {
  return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      send_json(res, e.status(), {{"error", e.what()}});
    } catch (const std::exception& e) {
      spdlog::error("{} {} failed: {}", req.method, req.path, e.what());
      send_json(res, 500, {{"error", e.what()}});
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  Impl(CopilotService& s, std::string t, std::chrono::milliseconds interval)
      : service(s), token(std::move(t)), sweep_interval(interval) {}

  CopilotService& service;
  std::string token;
  std::chrono::milliseconds sweep_interval;
  httplib::Server server;
  std::mutex mu;
  std::condition_variable cv;
  bool stopping = false;
  std::thread sweeper;

  void require_doctor(const httplib::Request& req) const {
    if (token.empty()) return;
    if (req.get_header_value("Authorization") != "Bearer " + token) {
      throw ServiceError(401, "doctor token required");
    }
  }

  void routes() {
    server.Get("/health", wrap([](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    }));

    server.Post("/sessions", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse_body(req);
      const auto state = service.create_session(string_field(body, "patient_id"));
      send_json(res, 201, {{"session_id", state.session_id},
                           {"patient_id", state.patient_id},
                           {"phase", to_string(state.phase)}});
    }));

    server.Get(R"(/sessions/([A-Za-z0-9_.\-]+))",
               wrap([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, service.session_view(req.matches[1]));
               }));

    server.Post(R"(/sessions/([A-Za-z0-9_.\-]+)/messages)",
                wrap([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  const auto out = service.post_message(req.matches[1], string_field(body, "text"));
                  send_json(res, 200, {{"type", to_string(out.kind)}, {"text", out.text}});
                }));

    server.Post(R"(/sessions/([A-Za-z0-9_.\-]+)/close)",
                wrap([this](const httplib::Request& req, httplib::Response& res) {
                  const auto r = service.close_session(req.matches[1]);
                  send_json(res, 200, {{"report", to_json(r.report)},
                                       {"report_text", format_report(r.report)},
                                       {"memory_record", to_json(r.memory_record)}});
                }));

    server.Get("/review", wrap([this](const httplib::Request& req, httplib::Response& res) {
      require_doctor(req);
      service.sweep_auto_approve();
      send_json(res, 200, service.review_queue());
    }));

    server.Post(R"(/review/([A-Za-z0-9_.\-]+))",
                wrap([this](const httplib::Request& req, httplib::Response& res) {
                  require_doctor(req);
                  const auto body = parse_body(req);
                  const auto kind = doctor_action_from_string(string_field(body, "action"));
                  if (!kind) throw ServiceError(400, "action must be approve, edit or guide");
                  const DoctorAction action{*kind, string_field(body, "text")};
                  const auto released = service.act_on_review(req.matches[1], action);
                  send_json(res, 200, {{"released", released}});
                }));

    server.Get(R"(/patients/([A-Za-z0-9_.\-]+)/history)",
               wrap([this](const httplib::Request& req, httplib::Response& res) {
                 const auto h = service.history(req.matches[1]);
                 json records = json::array();
                 for (const auto& r : h.records) records.push_back(to_json(r));
                 send_json(res, 200, {{"patient_id", h.patient_id}, {"records", records}});
               }));
  }
};

HttpServer::HttpServer(CopilotService& service, std::string doctor_token,
                       std::chrono::milliseconds sweep_interval)
    : impl_(std::make_unique<Impl>(service, std::move(doctor_token), sweep_interval)) {
  impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() {
  if (impl_->service.config().doctor.auto_approve_after) {
    impl_->sweeper = std::thread([impl = impl_.get()] {
      std::unique_lock lock(impl->mu);
      while (!impl->cv.wait_for(lock, impl->sweep_interval, [impl] { return impl->stopping; })) {
        lock.unlock();
        try {
          impl->service.sweep_auto_approve();
        } catch (const std::exception& e) {
          spdlog::warn("auto-approve sweep failed: {}", e.what());
        }
        lock.lock();
      }
    });
  }
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  {
    std::lock_guard lock(impl_->mu);
    impl_->stopping = true;
  }
  impl_->cv.notify_all();
  impl_->server.stop();
  if (impl_->sweeper.joinable()) impl_->sweeper.join();
}

}  // namespace copilot
