#pragma once

#include <array>
#include <chrono>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "copilot/gateway.hpp"
#include "copilot/prompts.hpp"
#include "copilot/timefmt.hpp"

namespace copilot {

enum class ReportSection { patient_condition, diagnosis, diagnostic_explanation, suggestions };

/// The four section headings in the order the report format requires.
inline constexpr std::array<std::string_view, 4> kReportHeadings = {
    "Patient's condition:", "Diagnosis:", "Diagnostic explanation:", "Suggestions:"};

std::string_view heading(ReportSection s);
std::string_view to_string(ReportSection s);

enum class HeadingMode {
  /// Exact, case-sensitive heading at the start of a line.
  strict,
  /// Case-insensitive, colon optional, tolerates markdown emphasis.
  lenient,
};

struct ConsultationReport {
  std::chrono::year_month_day date{};
  std::string patient_condition;
  std::string diagnosis;
  std::string diagnostic_explanation;
  std::string suggestions;
  /// Model output the report was parsed from; empty for hand-built reports.
  std::string raw;

  const std::string& section(ReportSection s) const;
  std::string& section(ReportSection s);

  bool same_content(const ConsultationReport& o) const;
};

struct ReportValidation {
  std::vector<std::string> missing;
  bool order_ok = true;

  bool ok() const { return missing.empty() && order_ok; }
};

/// Checks heading presence and order. Never throws.
ReportValidation validate_report_text(std::string_view text, HeadingMode mode = HeadingMode::strict);

/// Splits report text into sections. Throws MalformedReport (raw attached)
/// when a heading is missing or out of order. The date comes from the
/// report's `Date:` line when it parses, otherwise `fallback_date`.
ConsultationReport parse_report(std::string_view text, std::chrono::year_month_day fallback_date,
                                HeadingMode mode = HeadingMode::strict);

/// Plain-text rendering in the report layout; parse_report inverts it.
std::string format_report(const ConsultationReport& report);

nlohmann::json to_json(const ConsultationReport& report);

ConsultationReport generate_report(const LlmClient& client, const PromptLibrary& prompts,
                                   std::string_view transcript, Timestamp date,
                                   HeadingMode mode = HeadingMode::strict,
                                   Transcript* log = nullptr);

}  // namespace copilot
