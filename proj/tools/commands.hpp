#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "copilot/dialogue.hpp"

namespace copilot::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

/// Runs the `copilot` command line. Interactive verbs read from `in`.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

struct ClassifyFailure {
  std::size_t line = 0;
  std::string text;
  std::string expected;
  std::string predicted;
};

struct ClassifyBenchReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  /// (expected, predicted) -> count; predicted may be "unclassifiable".
  std::map<std::pair<std::string, std::string>, std::size_t> confusion;
  std::vector<ClassifyFailure> failures;
  /// (line, message) for rows that could not be read.
  std::vector<std::pair<std::size_t, std::string>> malformed;

  /// e.g. "208/210 = 99.05%".
  std::string accuracy_line() const;
  std::string format() const;
};

/// Classifies every `{text, expected_label}` row. Malformed rows are recorded
/// and skipped. Throws ConfigError when the file cannot be read and
/// PreconditionError when it holds no valid rows.
ClassifyBenchReport run_classify_bench(const DialogueEngine& engine,
                                       const std::filesystem::path& dataset);

}  // namespace copilot::cli
