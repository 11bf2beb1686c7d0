#include <gtest/gtest.h>

#include <random>

#include "copilot/errors.hpp"
#include "copilot/memory.hpp"
#include "test_support.hpp"

namespace copilot {
namespace {

using namespace std::chrono_literals;
using test::any;
using test::rule;

TEST(Retention, Boundaries30DayMonths) {
  const RetentionPolicy p;
  const auto now = make_timestamp(2024, 6, 1, 12);
  EXPECT_EQ(classify_retention(now, now, p), Retention::full);
  EXPECT_EQ(classify_retention(now - 90 * 24h, now, p), Retention::full);
  EXPECT_EQ(classify_retention(now - 90 * 24h - 1s, now, p), Retention::abbreviated);
  EXPECT_EQ(classify_retention(now - 180 * 24h, now, p), Retention::abbreviated);
  EXPECT_EQ(classify_retention(now - 180 * 24h - 1s, now, p), Retention::expired);
  EXPECT_THROW(classify_retention(now + 1s, now, p), FutureRecord);
}

TEST(Retention, CalendarMonthsClampToMonthEnd) {
  using M = RetentionPolicy::MonthMode;
  EXPECT_EQ(add_months(make_timestamp(2023, 11, 30, 8), 3, M::calendar),
            make_timestamp(2024, 2, 29, 8));
  EXPECT_EQ(add_months(make_timestamp(2024, 8, 31), 6, M::calendar), make_timestamp(2025, 2, 28));
  EXPECT_EQ(add_months(make_timestamp(2024, 1, 15), 3, M::fixed_30_days),
            make_timestamp(2024, 1, 15) + 90 * 24h);

  RetentionPolicy p;
  p.month_mode = M::calendar;
  const auto rec = make_timestamp(2024, 1, 31);
  EXPECT_EQ(classify_retention(rec, make_timestamp(2024, 4, 30), p), Retention::full);
  EXPECT_EQ(classify_retention(rec, make_timestamp(2024, 4, 30) + 1s, p), Retention::abbreviated);
  EXPECT_EQ(classify_retention(rec, make_timestamp(2024, 7, 31) + 1s, p), Retention::expired);
}

// Brute force over whole days in calendar mode: walk the month count forward
// one calendar month at a time from the record date.
Retention calendar_oracle(std::chrono::sys_days rec, std::chrono::sys_days now) {
  using namespace std::chrono;
  const auto threshold = [&](int months) {
    year_month_day ymd{rec};
    auto ym = ymd.year() / ymd.month();
    for (int i = 0; i < months; ++i) ym += std::chrono::months{1};
    const auto last = year_month_day_last{ym.year(), month_day_last{ym.month()}}.day();
    return sys_days{ym.year() / ym.month() / std::min(ymd.day(), last)};
  };
  if (now > threshold(6)) return Retention::expired;
  if (now > threshold(3)) return Retention::abbreviated;
  return Retention::full;
}

TEST(Retention, CalendarModeMatchesOracle) {
  RetentionPolicy p;
  p.month_mode = RetentionPolicy::MonthMode::calendar;
  std::mt19937 rng(3);
  const auto base = std::chrono::sys_days{std::chrono::year(2023) / 1 / 1};
  for (int i = 0; i < 2000; ++i) {
    const auto rec = base + std::chrono::days(std::uniform_int_distribution<int>(0, 800)(rng));
    const auto now = rec + std::chrono::days(std::uniform_int_distribution<int>(0, 260)(rng));
    EXPECT_EQ(classify_retention(Timestamp{rec}, Timestamp{now}, p), calendar_oracle(rec, now));
  }
}

TEST(Retention, PolicyValidation) {
  RetentionPolicy bad;
  bad.abbreviate_after_months = 6;
  bad.delete_after_months = 3;
  EXPECT_THROW(bad.validate(), PreconditionError);
  bad.abbreviate_after_months = 0;
  EXPECT_THROW(bad.validate(), PreconditionError);
}

TEST(DateHeader, EnforceRepairsOrPrepends) {
  const auto t = make_timestamp(2023, 12, 13, 20);
  std::string ok = "Date: 2023/12/13 20:00\nbody";
  EXPECT_FALSE(enforce_date_header(ok, t));
  std::string wrong = "Date: 2020/01/01 00:00\nbody";
  EXPECT_TRUE(enforce_date_header(wrong, t));
  EXPECT_EQ(wrong, "Date: 2023/12/13 20:00\nbody");
  std::string missing = "just a summary";
  EXPECT_TRUE(enforce_date_header(missing, t));
  EXPECT_EQ(missing, "Date: 2023/12/13 20:00\njust a summary");
}

TEST(SplitDatedBlocks, Blocks) {
  const auto blocks = split_dated_blocks(
      "preamble\nDate: 2023/12/13 20:00\nfirst\nmore\n\nDate: [2024/01/02 09:30]\nsecond\n");
  ASSERT_EQ(blocks.size(), 2u);
  EXPECT_EQ(blocks[0].first, make_timestamp(2023, 12, 13, 20));
  EXPECT_EQ(blocks[0].second, "Date: 2023/12/13 20:00\nfirst\nmore");
  EXPECT_EQ(blocks[1].first, make_timestamp(2024, 1, 2, 9, 30));
}

TEST(Summarize, AddsHeaderAndRejectsEmpty) {
  auto b = test::scripted({any("memory_summary", "The patient had a cold.")});
  const auto end = make_timestamp(2024, 2, 8, 20);
  const auto rec = summarize_consultation(test::client(b), test::prompts(), "Patient: cold", end);
  EXPECT_EQ(rec.summary, "Date: 2024/02/08 20:00\nThe patient had a cold.");
  EXPECT_TRUE(rec.header_repaired);
  EXPECT_EQ(rec.retention, Retention::full);
  EXPECT_THROW(summarize_consultation(test::client(b), test::prompts(), " ", end),
               PreconditionError);
}

TEST(UpdateHistory, AppendsAndKeepsAbbreviatedOnce) {
  const auto now = make_timestamp(2024, 6, 1);
  const auto old = now - 100 * 24h;
  PatientHistory h{"p", {{old, date_header(old) + "\nlong text", Retention::abbreviated}}};
  auto b = test::scripted({});
  MemoryRecord fresh{now, date_header(now) + "\nnew"};
  UpdateStats stats;
  const auto out = update_history(test::client(b), test::prompts(), h, fresh, now, {}, nullptr, &stats);
  ASSERT_EQ(out.records.size(), 2u);
  EXPECT_EQ(out.records[0].summary, h.records[0].summary);
  EXPECT_EQ(out.records[1], fresh);
  EXPECT_EQ(b->calls(), 0u);
  EXPECT_EQ(stats.kept, 2u);
}

TEST(UpdateHistory, Errors) {
  const auto now = make_timestamp(2024, 6, 1);
  PatientHistory h{"p", {{now - 24h, "Date: x\nrecent"}}};
  auto b = test::scripted({});
  EXPECT_THROW(update_history(test::client(b), test::prompts(), h,
                              MemoryRecord{now - 48h, "older"}, now, {}),
               OrderViolation);
  EXPECT_THROW(update_history(test::client(b), test::prompts(), h,
                              MemoryRecord{now + 48h, "future"}, now, {}),
               FutureRecord);
}

TEST(UpdateHistory, CompressorWithoutHeaderGetsOne) {
  const auto now = make_timestamp(2024, 6, 1);
  const auto old = now - 120 * 24h;
  PatientHistory h{"p", {{old, date_header(old) + "\nlong"}}};
  auto b = test::scripted({any("memory_update", "Symptoms: cough. Diagnosis: cold.")});
  const auto out = update_history(test::client(b), test::prompts(), h, std::nullopt, now, {});
  ASSERT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.records[0].summary, date_header(old) + "\nSymptoms: cough. Diagnosis: cold.");
}

TEST(UpdateHistoryViaModel, ParsesBlocksAndClassifies) {
  const auto now = make_timestamp(2024, 6, 1);
  const auto a = now - 120 * 24h;
  PatientHistory h{"p", {{a, date_header(a) + "\nold"}}};
  auto b = test::scripted({any("memory_update", date_header(a) + "\nshort\n\n" + date_header(now) +
                                                    "\ncurrent")});
  const auto out = update_history_via_model(test::client(b), test::prompts(), h,
                                            {now, date_header(now) + "\ncurrent"}, now, {});
  ASSERT_EQ(out.records.size(), 2u);
  EXPECT_EQ(out.records[0].retention, Retention::abbreviated);
  EXPECT_EQ(out.records[1].summary, date_header(now) + "\ncurrent");
}

TEST(ClinicalRecord, Render) {
  EXPECT_EQ(render_clinical_record({"p", {}}), "");
  PatientHistory h{"p", {{{}, "a"}, {{}, "b"}}};
  EXPECT_EQ(render_clinical_record(h), "a\n\nb");
}

}  // namespace
}  // namespace copilot
