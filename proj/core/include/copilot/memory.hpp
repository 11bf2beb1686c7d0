#pragma once

// Patient history memory: timestamped consultation summaries that decay with
// age. Records older than the abbreviation threshold are compressed to
// symptoms and diagnosis; records older than the deletion threshold are
// dropped. The date arithmetic is done here; only the compression itself is
// delegated to the LLM.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "copilot/gateway.hpp"
#include "copilot/prompts.hpp"
#include "copilot/timefmt.hpp"

namespace copilot {

enum class Retention { full, abbreviated, expired };

std::string_view to_string(Retention r);
std::optional<Retention> retention_from_string(std::string_view s);

struct RetentionPolicy {
  enum class MonthMode {
    /// A month is exactly 30 days.
    fixed_30_days,
    /// Calendar months; the day is clamped to the end of shorter months.
    calendar,
  };

  int abbreviate_after_months = 3;
  int delete_after_months = 6;
  MonthMode month_mode = MonthMode::fixed_30_days;

  /// Throws PreconditionError unless 0 < abbreviate_after < delete_after.
  void validate() const;
};

/// Point in time that lies `months` months after `t` under `mode`.
Timestamp add_months(Timestamp t, int months, RetentionPolicy::MonthMode mode);

/// age > delete_after -> expired; abbreviate_after < age <= delete_after ->
/// abbreviated; otherwise full. Throws FutureRecord when recorded_at > now.
Retention classify_retention(Timestamp recorded_at, Timestamp now, const RetentionPolicy& policy);

struct MemoryRecord {
  Timestamp recorded_at{};
  /// Starts with a `Date: YYYY/MM/DD HH:MM` header line.
  std::string summary;
  Retention retention = Retention::full;
  /// The model omitted or misdated the header and the engine rewrote it.
  bool header_repaired = false;

  bool operator==(const MemoryRecord& o) const {
    return recorded_at == o.recorded_at && summary == o.summary && retention == o.retention;
  }
};

/// `Date: YYYY/MM/DD HH:MM`.
std::string date_header(Timestamp t);

/// Ensures `text` starts with `date_header(at)`: a leading `Date:` line with a
/// different value is replaced, a missing one is prepended. Returns whether
/// anything changed.
bool enforce_date_header(std::string& text, Timestamp at);

struct PatientHistory {
  std::string patient_id;
  /// Ascending by recorded_at.
  std::vector<MemoryRecord> records;

  bool operator==(const PatientHistory&) const = default;
};

/// Summarizes a finished consultation into a dated record with retention
/// full. Throws PreconditionError on an empty transcript.
MemoryRecord summarize_consultation(const LlmClient& client, const PromptLibrary& prompts,
                                    std::string_view transcript, Timestamp ended_at,
                                    Transcript* log = nullptr);

struct UpdateStats {
  std::size_t dropped = 0;
  std::size_t abbreviated = 0;
  std::size_t kept = 0;
};

/// One decay pass. Expired records are dropped, records newly in the
/// abbreviation window are compressed through the memory-update prompt
/// (once; records already marked abbreviated are left alone), full records
/// pass through byte-identical, and `new_record` (if any) is appended.
/// Throws OrderViolation when new_record predates the last record.
PatientHistory update_history(const LlmClient& client, const PromptLibrary& prompts,
                              const PatientHistory& history,
                              const std::optional<MemoryRecord>& new_record, Timestamp now,
                              const RetentionPolicy& policy, Transcript* log = nullptr,
                              UpdateStats* stats = nullptr);

/// Alternative pass that hands the whole history to the memory-update prompt
/// and lets the model apply all three rules, then parses the dated blocks it
/// returns. Kept for comparisons against the rule-based pass.
PatientHistory update_history_via_model(const LlmClient& client, const PromptLibrary& prompts,
                                        const PatientHistory& history,
                                        const MemoryRecord& new_record, Timestamp now,
                                        const RetentionPolicy& policy, Transcript* log = nullptr);

/// Splits text into blocks that each start at a `Date:` line.
std::vector<std::pair<Timestamp, std::string>> split_dated_blocks(std::string_view text);

/// Summaries in chronological order separated by blank lines; empty history
/// renders as "".
std::string render_clinical_record(const PatientHistory& history);

}  // namespace copilot
