#include <gtest/gtest.h>

#include <thread>

#include "copilot/errors.hpp"
#include "copilot/storage.hpp"
#include "test_support.hpp"

namespace copilot {
namespace {

TEST(Storage, AtomicWriteReplaces) {
  test::TempDir dir;
  const auto p = dir / "nested" / "file.json";
  atomic_write(p, "one");
  atomic_write(p, "two");
  EXPECT_EQ(test::read_text(p), "two");
  EXPECT_FALSE(std::filesystem::exists(p.string() + ".tmp"));
}

TEST(Storage, ReadJsonlReportsLine) {
  test::TempDir dir;
  const auto p = dir / "x.jsonl";
  EXPECT_TRUE(read_jsonl(p).empty());
  test::write_text(p, "{\"a\":1}\n\n{\"a\":2}\n{bad\n");
  try {
    read_jsonl(p);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(Storage, SessionJsonRoundTrip) {
  SessionState s;
  s.session_id = "s1";
  s.patient_id = "p1";
  s.started_at = make_timestamp(2024, 2, 8, 20);
  s.phase = Phase::doctor_review;
  s.task = TaskKind::diagnosis;
  s.opener = 0;
  s.inquiry_round = 2;
  s.turns = {{Speaker::patient, "hi", s.started_at}, {Speaker::copilot, "q?", s.started_at}};
  s.pending = PendingResponse{"raw", "safe", std::nullopt, true};
  EXPECT_EQ(session_from_json(to_json(s)), s);
}

TEST(Storage, FileIds) {
  EXPECT_NO_THROW(check_file_id("patient-01_a.b"));
  for (const char* bad : {"", "..", "a/b", "a b", "é"}) {
    EXPECT_THROW(check_file_id(bad), PreconditionError) << bad;
  }
}

TEST(HistoryStore, SaveLoad) {
  test::TempDir dir;
  HistoryStore store(dir / "histories");
  EXPECT_FALSE(store.exists("p1"));
  EXPECT_TRUE(store.load("p1").records.empty());
  const auto t = make_timestamp(2024, 1, 1, 9);
  PatientHistory h{"p1", {{t, date_header(t) + "\nflu", Retention::abbreviated}}};
  store.save(h);
  EXPECT_TRUE(store.exists("p1"));
  EXPECT_EQ(store.load("p1"), h);
  EXPECT_THROW(store.load("../etc"), PreconditionError);
}

TEST(HistoryStore, CorruptRecordNamesLine) {
  test::TempDir dir;
  test::write_text(dir / "h" / "p.jsonl",
                   "{\"recorded_at\":\"2024-01-01T00:00:00Z\",\"retention\":\"full\",\"summary\":\"a\"}\n"
                   "{\"recorded_at\":\"never\",\"retention\":\"full\",\"summary\":\"b\"}\n");
  HistoryStore store(dir / "h");
  try {
    store.load("p");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(HistoryStore, PerPatientLockSerializes) {
  test::TempDir dir;
  HistoryStore store(dir.path());
  int counter = 0;
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      for (int j = 0; j < 1000; ++j) {
        auto lock = store.lock("p");
        ++counter;
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(counter, 8000);
}

TEST(TranscriptLog, AppendLoadReplace) {
  test::TempDir dir;
  TranscriptLog log(dir.path());
  const auto t = make_timestamp(2024, 1, 1);
  log.append("s", {Speaker::patient, "a", t});
  log.append("s", {Speaker::copilot, "b", t});
  EXPECT_EQ(log.load("s").size(), 2u);
  log.replace("s", {{Speaker::patient, "only", t}});
  const auto turns = log.load("s");
  ASSERT_EQ(turns.size(), 1u);
  EXPECT_EQ(turns[0].text, "only");
}

}  // namespace
}  // namespace copilot
