#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "copilot/service.hpp"

namespace copilot {

/// JSON-over-HTTP front end for CopilotService.
///
///   POST /sessions                 {patient_id}          -> 201 {session_id, ...}
///   GET  /sessions/{id}                                  -> session view
///   POST /sessions/{id}/messages   {text}                -> {type, text}
///   POST /sessions/{id}/close                            -> {report, report_text, memory_record}
///   GET  /review                                         -> open items
///   POST /review/{id}              {action, text}        -> {released}
///   GET  /patients/{id}/history                          -> records
///   GET  /health
///
/// Errors are `{"error": message}` with the service's status code. Review
/// endpoints require `Authorization: Bearer <token>` when a doctor token is
/// configured.
class HttpServer {
 public:
  explicit HttpServer(CopilotService& service, std::string doctor_token = {},
                      std::chrono::milliseconds sweep_interval = std::chrono::seconds(1));
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port or throws Error.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Also runs the auto-approve sweep.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace copilot
