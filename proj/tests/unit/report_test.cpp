#include <gtest/gtest.h>

#include "copilot/errors.hpp"
#include "copilot/report.hpp"
#include "test_support.hpp"

namespace copilot {
namespace {

using namespace std::chrono;

const year_month_day kFallback{year(2024) / 1 / 1};

const char* kReport =
    "Date: [2024/02/08 20:00]\n"
    "Patient's condition:\nHeadache.\n\n"
    "Diagnosis:\nMigraine.\n\n"
    "Diagnostic explanation:\nTypical pattern.\n\n"
    "Suggestions:\nRest.\nDrink water.\n";

TEST(Report, ParseSections) {
  const auto r = parse_report(kReport, kFallback);
  EXPECT_EQ(r.date, year_month_day(year(2024) / 2 / 8));
  EXPECT_EQ(r.patient_condition, "Headache.");
  EXPECT_EQ(r.diagnosis, "Migraine.");
  EXPECT_EQ(r.diagnostic_explanation, "Typical pattern.");
  EXPECT_EQ(r.suggestions, "Rest.\nDrink water.");
  EXPECT_EQ(r.raw, kReport);
}

TEST(Report, InlineTextAndFallbackDate) {
  const auto r = parse_report(
      "Patient's condition: cough\nDiagnosis: cold\nDiagnostic explanation: viral\nSuggestions: rest",
      kFallback);
  EXPECT_EQ(r.date, kFallback);
  EXPECT_EQ(r.patient_condition, "cough");
  EXPECT_EQ(r.suggestions, "rest");
}

TEST(Report, FormatRoundTrips) {
  const auto r = parse_report(kReport, kFallback);
  const auto again = parse_report(format_report(r), kFallback);
  EXPECT_TRUE(again.same_content(r));
  EXPECT_EQ(format_report(r).rfind("Date: 2024/02/08\n", 0), 0u);
}

TEST(Report, Validation) {
  EXPECT_TRUE(validate_report_text(kReport).ok());
  const auto empty = validate_report_text("");
  EXPECT_EQ(empty.missing.size(), 4u);
  const auto shuffled = validate_report_text(
      "Diagnosis:\na\nPatient's condition:\nb\nDiagnostic explanation:\nc\nSuggestions:\nd");
  EXPECT_TRUE(shuffled.missing.empty());
  EXPECT_FALSE(shuffled.order_ok);
  EXPECT_THROW(parse_report("Diagnosis:\na\nPatient's condition:\nb\nDiagnostic explanation:\nc\n"
                            "Suggestions:\nd",
                            kFallback),
               MalformedReport);
}

TEST(Report, LenientHeadings) {
  const std::string md =
      "**Patient's Condition:** cough\n## diagnosis\ncold\n*Diagnostic Explanation*: viral\n"
      "SUGGESTIONS: rest";
  EXPECT_FALSE(validate_report_text(md, HeadingMode::strict).ok());
  const auto r = parse_report(md, kFallback, HeadingMode::lenient);
  EXPECT_EQ(r.patient_condition, "cough");
  EXPECT_EQ(r.diagnosis, "cold");
  EXPECT_EQ(r.diagnostic_explanation, "viral");
  EXPECT_EQ(r.suggestions, "rest");
}

TEST(Report, Json) {
  const auto j = to_json(parse_report(kReport, kFallback));
  EXPECT_EQ(j["date"], "2024/02/08");
  EXPECT_EQ(j["diagnosis"], "Migraine.");
  EXPECT_EQ(j.size(), 5u);
}

TEST(Report, GenerateRejectsEmptyTranscript) {
  auto b = test::scripted({});
  EXPECT_THROW(generate_report(test::client(b), test::prompts(), "  ", make_timestamp(2024, 1, 1)),
               PreconditionError);
}

TEST(Report, GenerateBindsConversationAndDate) {
  auto b = test::scripted({test::rule("conversation:Patient: cough\ndate: 2024/02/08 20:00", kReport,
                                      "report")});
  Transcript log;
  const auto r = generate_report(test::client(b), test::prompts(), "Patient: cough",
                                 make_timestamp(2024, 2, 8, 20), HeadingMode::strict, &log);
  EXPECT_EQ(r.diagnosis, "Migraine.");
  EXPECT_EQ(log.entries().at(0).request.temperature, 0.0);
}

}  // namespace
}  // namespace copilot
