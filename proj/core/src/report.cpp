#include "copilot/report.hpp"

#include <optional>

#include "copilot/errors.hpp"
#include "text.hpp"

namespace copilot {

namespace chr = std::chrono;

namespace {

constexpr std::array<ReportSection, 4> kSections = {
    ReportSection::patient_condition, ReportSection::diagnosis,
    ReportSection::diagnostic_explanation, ReportSection::suggestions};

std::string_view strip_emphasis(std::string_view s) {
  while (!s.empty() && (s.front() == '*' || s.front() == '#' || s.front() == '_' ||
                        s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  return s;
}

// Length of the heading prefix if `line` opens section `idx`, else nullopt.
std::optional<std::size_t> heading_prefix(std::string_view line, std::size_t idx, HeadingMode mode) {
  const auto h = kReportHeadings[idx];
  if (mode == HeadingMode::strict) {
    if (line.starts_with(h)) return h.size();
    return std::nullopt;
  }
  const auto stripped = strip_emphasis(line);
  const auto offset = line.size() - stripped.size();
  const auto word = h.substr(0, h.size() - 1);  // without the colon
  if (stripped.size() < word.size() || to_lower(stripped.substr(0, word.size())) != to_lower(word)) {
    return std::nullopt;
  }
  auto pos = word.size();
  while (pos < stripped.size() && (stripped[pos] == '*' || stripped[pos] == '_')) ++pos;
  if (pos < stripped.size() && stripped[pos] == ':') {
    ++pos;
    while (pos < stripped.size() && (stripped[pos] == '*' || stripped[pos] == '_')) ++pos;
    return offset + pos;
  }
  if (trim(stripped.substr(pos)).empty()) return offset + pos;
  return std::nullopt;
}

struct HeadingHit {
  std::size_t line;
  std::size_t section;
  std::size_t prefix;
};

std::vector<HeadingHit> find_headings(const std::vector<std::string_view>& lines, HeadingMode mode) {
  std::vector<HeadingHit> hits;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    for (std::size_t s = 0; s < kReportHeadings.size(); ++s) {
      if (auto len = heading_prefix(lines[i], s, mode)) {
        hits.push_back({i, s, *len});
        break;
      }
    }
  }
  return hits;
}

std::string join_trimmed(const std::vector<std::string_view>& lines, std::size_t begin,
                         std::size_t end, std::string_view first_tail) {
  std::vector<std::string_view> body;
  if (!trim(first_tail).empty()) body.push_back(trim(first_tail));
  for (auto i = begin; i < end; ++i) body.push_back(lines[i]);
  while (!body.empty() && trim(body.front()).empty()) body.erase(body.begin());
  while (!body.empty() && trim(body.back()).empty()) body.pop_back();
  std::string out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (i) out += '\n';
    out += body[i];
  }
  return out;
}

std::optional<chr::year_month_day> parse_date_line(std::string_view line) {
  auto t = trim(strip_emphasis(line));
  if (!t.starts_with("Date:") && !t.starts_with("date:")) return std::nullopt;
  auto value = trim(t.substr(5));
  if (value.starts_with('[')) value.remove_prefix(1);
  if (value.ends_with(']')) value.remove_suffix(1);
  value = trim(value);
  if (auto ts = parse_timestamp(value)) return chr::year_month_day{chr::floor<chr::days>(*ts)};
  if (value.size() > 10) {
    if (auto ts = parse_timestamp(value.substr(0, 10))) {
      return chr::year_month_day{chr::floor<chr::days>(*ts)};
    }
  }
  return std::nullopt;
}

}  // namespace

std::string_view heading(ReportSection s) { return kReportHeadings[static_cast<std::size_t>(s)]; }

std::string_view to_string(ReportSection s) {
  switch (s) {
    case ReportSection::patient_condition: return "patient_condition";
    case ReportSection::diagnosis: return "diagnosis";
    case ReportSection::diagnostic_explanation: return "diagnostic_explanation";
    case ReportSection::suggestions: return "suggestions";
  }
  return "patient_condition";
}

const std::string& ConsultationReport::section(ReportSection s) const {
  switch (s) {
    case ReportSection::patient_condition: return patient_condition;
    case ReportSection::diagnosis: return diagnosis;
    case ReportSection::diagnostic_explanation: return diagnostic_explanation;
    case ReportSection::suggestions: return suggestions;
  }
  return patient_condition;
}

std::string& ConsultationReport::section(ReportSection s) {
  return const_cast<std::string&>(std::as_const(*this).section(s));
}

bool ConsultationReport::same_content(const ConsultationReport& o) const {
  return date == o.date && patient_condition == o.patient_condition && diagnosis == o.diagnosis &&
         diagnostic_explanation == o.diagnostic_explanation && suggestions == o.suggestions;
}

ReportValidation validate_report_text(std::string_view text, HeadingMode mode) {
  const auto lines = split_lines(text);
  const auto hits = find_headings(lines, mode);
  ReportValidation v;
  std::array<std::optional<std::size_t>, 4> first{};
  for (const auto& h : hits) {
    if (!first[h.section]) first[h.section] = h.line;
  }
  std::optional<std::size_t> prev;
  for (std::size_t s = 0; s < first.size(); ++s) {
    if (!first[s]) {
      v.missing.emplace_back(kReportHeadings[s]);
      continue;
    }
    if (prev && *first[s] <= *prev) v.order_ok = false;
    prev = first[s];
  }
  return v;
}

ConsultationReport parse_report(std::string_view text, chr::year_month_day fallback_date,
                                HeadingMode mode) {
  const auto check = validate_report_text(text, mode);
  if (!check.missing.empty()) {
    std::string names;
    for (const auto& m : check.missing) names += (names.empty() ? "" : ", ") + m;
    throw MalformedReport("report is missing headings: " + names, std::string(text));
  }
  if (!check.order_ok) {
    throw MalformedReport("report headings are out of order", std::string(text));
  }

  const auto lines = split_lines(text);
  const auto hits = find_headings(lines, mode);
  ConsultationReport report;
  report.raw = std::string(text);
  report.date = fallback_date;
  const auto first_heading = hits.front().line;
  for (std::size_t i = 0; i < first_heading; ++i) {
    if (auto d = parse_date_line(lines[i])) {
      report.date = *d;
      break;
    }
  }

  std::array<bool, 4> filled{};
  for (std::size_t k = 0; k < hits.size(); ++k) {
    const auto& h = hits[k];
    if (filled[h.section]) continue;
    filled[h.section] = true;
    const auto end = k + 1 < hits.size() ? hits[k + 1].line : lines.size();
    report.section(kSections[h.section]) =
        join_trimmed(lines, h.line + 1, end, lines[h.line].substr(h.prefix));
  }
  return report;
}

std::string format_report(const ConsultationReport& report) {
  std::string out = "Date: " + format_day(report.date) + "\n";
  for (std::size_t s = 0; s < kSections.size(); ++s) {
    if (s) out += "\n";
    out += kReportHeadings[s];
    out += "\n";
    out += report.section(kSections[s]);
    out += "\n";
  }
  return out;
}

nlohmann::json to_json(const ConsultationReport& report) {
  nlohmann::json j;
  j["date"] = format_day(report.date);
  for (auto s : kSections) j[std::string(to_string(s))] = report.section(s);
  return j;
}

ConsultationReport generate_report(const LlmClient& client, const PromptLibrary& prompts,
                                   std::string_view transcript, Timestamp date, HeadingMode mode,
                                   Transcript* log) {
  if (trim(transcript).empty()) throw PreconditionError("cannot report on an empty consultation");
  const auto prompt = prompts.render(
      TemplateId::report, {{"conversation", std::string(transcript)}, {"date", format_minute(date)}});
  const auto raw = client.ask("report", prompt, 0.0, log);
  return parse_report(raw, chr::year_month_day{chr::floor<chr::days>(date)}, mode);
}

}  // namespace copilot
