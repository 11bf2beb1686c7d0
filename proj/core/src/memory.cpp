#include "copilot/memory.hpp"

#include <algorithm>

#include "copilot/errors.hpp"
#include "text.hpp"

namespace copilot {

namespace chr = std::chrono;

namespace {
constexpr std::string_view kDatePrefix = "Date:";

std::optional<Timestamp> header_time(std::string_view line) {
  auto t = trim(line);
  if (!t.starts_with(kDatePrefix)) return std::nullopt;
  auto value = trim(t.substr(kDatePrefix.size()));
  if (value.starts_with('[') && value.ends_with(']')) {
    value = trim(value.substr(1, value.size() - 2));
  }
  return parse_timestamp(value);
}
}  // namespace

std::string_view to_string(Retention r) {
  switch (r) {
    case Retention::full: return "full";
    case Retention::abbreviated: return "abbreviated";
    case Retention::expired: return "expired";
  }
  return "full";
}

std::optional<Retention> retention_from_string(std::string_view s) {
  if (s == "full") return Retention::full;
  if (s == "abbreviated") return Retention::abbreviated;
  if (s == "expired") return Retention::expired;
  return std::nullopt;
}

void RetentionPolicy::validate() const {
  if (abbreviate_after_months <= 0 || delete_after_months <= abbreviate_after_months) {
    throw PreconditionError("retention policy needs 0 < abbreviate_after < delete_after");
  }
}

Timestamp add_months(Timestamp t, int months, RetentionPolicy::MonthMode mode) {
  if (mode == RetentionPolicy::MonthMode::fixed_30_days) return t + chr::days{30 * months};
  const auto day = chr::floor<chr::days>(t);
  const auto tod = t - day;
  const chr::year_month_day ymd{day};
  chr::year_month_day shifted = ymd + chr::months{months};
  if (!shifted.ok()) {
    shifted = chr::year_month_day{chr::year_month_day_last{
        shifted.year(), chr::month_day_last{shifted.month()}}};
  }
  return chr::sys_days{shifted} + tod;
}

Retention classify_retention(Timestamp recorded_at, Timestamp now, const RetentionPolicy& policy) {
  policy.validate();
  if (recorded_at > now) {
    throw FutureRecord("record dated " + format_minute(recorded_at) + " is after " +
                       format_minute(now));
  }
  if (now > add_months(recorded_at, policy.delete_after_months, policy.month_mode)) {
    return Retention::expired;
  }
  if (now > add_months(recorded_at, policy.abbreviate_after_months, policy.month_mode)) {
    return Retention::abbreviated;
  }
  return Retention::full;
}

std::string date_header(Timestamp t) { return std::string(kDatePrefix) + " " + format_minute(t); }

bool enforce_date_header(std::string& text, Timestamp at) {
  const auto header = date_header(at);
  auto body = std::string_view(text);
  while (!body.empty() && (body.front() == '\n' || body.front() == '\r' || body.front() == ' ')) {
    body.remove_prefix(1);
  }
  const auto nl = body.find('\n');
  const auto first = body.substr(0, nl);
  if (trim(first) == header) {
    const bool changed = body.size() != text.size() || first != header;
    if (changed) {
      const auto rest = nl == std::string_view::npos ? std::string_view{} : body.substr(nl);
      text = header + std::string(rest);
    }
    return changed;
  }
  if (trim(first).starts_with(kDatePrefix)) {
    const auto rest = nl == std::string_view::npos ? std::string_view{} : body.substr(nl);
    text = header + std::string(rest);
  } else {
    text = header + "\n" + std::string(body);
  }
  return true;
}

MemoryRecord summarize_consultation(const LlmClient& client, const PromptLibrary& prompts,
                                    std::string_view transcript, Timestamp ended_at,
                                    Transcript* log) {
  if (trim(transcript).empty()) throw PreconditionError("cannot summarize an empty consultation");
  const auto prompt = prompts.render(
      TemplateId::memory_summary,
      {{"date", format_minute(ended_at)}, {"conversation", std::string(transcript)}});
  MemoryRecord rec;
  rec.recorded_at = ended_at;
  rec.summary = client.ask("memory_summary", prompt, 0.7, log);
  rec.header_repaired = enforce_date_header(rec.summary, ended_at);
  rec.retention = Retention::full;
  return rec;
}

std::vector<std::pair<Timestamp, std::string>> split_dated_blocks(std::string_view text) {
  std::vector<std::pair<Timestamp, std::string>> out;
  for (auto line : split_lines(text)) {
    if (auto t = header_time(line)) {
      out.emplace_back(*t, std::string(trim(line)));
      continue;
    }
    if (out.empty()) continue;
    out.back().second += '\n';
    out.back().second += line;
  }
  for (auto& [_, block] : out) {
    while (!block.empty() && (block.back() == '\n' || block.back() == ' ')) block.pop_back();
  }
  return out;
}

namespace {

std::string compress_record(const LlmClient& client, const PromptLibrary& prompts,
                            const MemoryRecord& rec, std::string_view current_record,
                            Transcript* log) {
  const auto prompt = prompts.render(
      TemplateId::memory_update,
      {{"history_records", rec.summary}, {"current_record", std::string(current_record)}});
  const auto reply = client.ask("memory_update", prompt, 0.7, log);
  // The prompt asks the model to echo the current record after the updated
  // history; keep only the block belonging to this record.
  std::string compressed;
  const auto blocks = split_dated_blocks(reply);
  for (const auto& [t, block] : blocks) {
    if (t == rec.recorded_at) {
      compressed = block;
      break;
    }
  }
  if (compressed.empty()) {
    compressed = blocks.empty() ? std::string(trim(reply)) : blocks.front().second;
  }
  if (trim(compressed).empty()) return rec.summary;
  enforce_date_header(compressed, rec.recorded_at);
  return compressed;
}

}  // namespace

PatientHistory update_history(const LlmClient& client, const PromptLibrary& prompts,
                              const PatientHistory& history,
                              const std::optional<MemoryRecord>& new_record, Timestamp now,
                              const RetentionPolicy& policy, Transcript* log, UpdateStats* stats) {
  policy.validate();
  if (new_record && !history.records.empty() &&
      new_record->recorded_at < history.records.back().recorded_at) {
    throw OrderViolation("new record predates the patient's latest record");
  }
  if (new_record && new_record->recorded_at > now) {
    throw FutureRecord("new record is dated after the update time");
  }

  const auto current = new_record ? new_record->summary : date_header(now);
  std::vector<MemoryRecord> incoming = history.records;
  if (new_record) incoming.push_back(*new_record);

  UpdateStats local;
  PatientHistory out{history.patient_id, {}};
  for (const auto& rec : incoming) {
    switch (classify_retention(rec.recorded_at, now, policy)) {
      case Retention::expired:
        ++local.dropped;
        break;
      case Retention::abbreviated: {
        MemoryRecord next = rec;
        if (rec.retention != Retention::abbreviated) {
          next.summary = compress_record(client, prompts, rec, current, log);
          next.retention = Retention::abbreviated;
          ++local.abbreviated;
        } else {
          ++local.kept;
        }
        out.records.push_back(std::move(next));
        break;
      }
      case Retention::full:
        ++local.kept;
        out.records.push_back(rec);
        break;
    }
  }
  if (stats) *stats = local;
  return out;
}

PatientHistory update_history_via_model(const LlmClient& client, const PromptLibrary& prompts,
                                        const PatientHistory& history,
                                        const MemoryRecord& new_record, Timestamp now,
                                        const RetentionPolicy& policy, Transcript* log) {
  policy.validate();
  if (!history.records.empty() && new_record.recorded_at < history.records.back().recorded_at) {
    throw OrderViolation("new record predates the patient's latest record");
  }
  const auto prompt = prompts.render(TemplateId::memory_update,
                                     {{"history_records", render_clinical_record(history)},
                                      {"current_record", new_record.summary}});
  const auto reply = client.ask("memory_update", prompt, 0.7, log);

  PatientHistory out{history.patient_id, {}};
  for (auto& [t, block] : split_dated_blocks(reply)) {
    if (t > now) continue;
    MemoryRecord rec;
    rec.recorded_at = t;
    rec.summary = std::move(block);
    rec.retention = classify_retention(t, now, policy);
    out.records.push_back(std::move(rec));
  }
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const auto& a, const auto& b) { return a.recorded_at < b.recorded_at; });
  return out;
}

std::string render_clinical_record(const PatientHistory& history) {
  std::string out;
  for (const auto& rec : history.records) {
    if (!out.empty()) out += "\n\n";
    out += rec.summary;
  }
  return out;
}

}  // namespace copilot
