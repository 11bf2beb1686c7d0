#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace copilot {

/// Base for every error raised by the copilot library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// --- gateway -----------------------------------------------------------------

/// Network failure or HTTP status >= 500 (after retries), or another non-auth
/// HTTP failure. `retryable()` tells the retry loop whether to try again.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int http_status, bool retryable)
      : Error(what), http_status_(http_status), retryable_(retryable) {}
  int http_status() const noexcept { return http_status_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  int http_status_;
  bool retryable_;
};

/// HTTP 401/403. Never retried.
class AuthError : public Error {
 public:
  AuthError(const std::string& what, int http_status)
      : Error(what), http_status_(http_status) {}
  int http_status() const noexcept { return http_status_; }

 private:
  int http_status_;
};

/// Backend produced empty content with finish_reason=error.
class BackendRefusal : public Error {
 public:
  using Error::Error;
};

/// Scripted backend has no rule matching the request.
class UnscriptedRequest : public Error {
 public:
  using Error::Error;
};

// --- prompt library ----------------------------------------------------------

class UnknownTemplate : public Error {
 public:
  using Error::Error;
};

class MissingBinding : public Error {
 public:
  explicit MissingBinding(std::string name)
      : Error("missing binding for placeholder {" + name + "}"), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

/// A template asset does not hash to its pinned SHA-256 digest.
class DigestMismatch : public Error {
 public:
  using Error::Error;
};

// --- dialogue ----------------------------------------------------------------

class Unclassifiable : public Error {
 public:
  using Error::Error;
};

class MalformedInquiry : public Error {
 public:
  using Error::Error;
};

class IllegalTransition : public Error {
 public:
  using Error::Error;
};

// --- memory ------------------------------------------------------------------

class FutureRecord : public Error {
 public:
  using Error::Error;
};

class OrderViolation : public Error {
 public:
  using Error::Error;
};

// --- report ------------------------------------------------------------------

class MalformedReport : public Error {
 public:
  MalformedReport(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// --- evaluation --------------------------------------------------------------

/// Judge output did not follow the expected grammar. Carries the field that
/// failed and the raw judge text for inspection.
class JudgeParseError : public Error {
 public:
  JudgeParseError(const std::string& what, std::string field, std::string raw)
      : Error(what), field_(std::move(field)), raw_(std::move(raw)) {}
  const std::string& field() const noexcept { return field_; }
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string field_;
  std::string raw_;
};

class CorpusTooSmall : public Error {
 public:
  using Error::Error;
};

/// Bad line in a line-delimited input file. `line()` is 1-based.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace copilot
