#include <gtest/gtest.h>

#include <random>

#include "copilot/errors.hpp"
#include "copilot/eval.hpp"
#include "test_support.hpp"

namespace copilot {
namespace {

std::vector<JudgedDialogue> dialogues(int n) {
  std::vector<JudgedDialogue> out;
  for (int i = 1; i <= n; ++i) out.push_back({"d" + std::to_string(i), "text " + std::to_string(i)});
  return out;
}

std::string block(int k, const std::string& score) {
  return "Dialogue " + std::to_string(k) + ":\nGood: g\nBad: b\nSummary: s\nScore: " + score + "\n";
}

std::string field_of(const std::string& raw, int n) {
  try {
    parse_judge_output(raw, dialogues(n), CriterionId::response_safety);
  } catch (const JudgeParseError& e) {
    EXPECT_EQ(e.raw(), raw);
    return e.field();
  }
  return "";
}

TEST(JudgeParse, SingleDialogueWithoutRank) {
  const auto r = parse_judge_output(
      "Dialogue 1:\nGood: Asks about duration.\nBad: Misses allergies\nand history.\n"
      "Summary: Decent.\nScore: 3",
      dialogues(1), CriterionId::inquiry_capability);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].dialogue_id, "d1");
  EXPECT_EQ(r[0].score, 3);
  EXPECT_EQ(r[0].bad, "Misses allergies\nand history.");
  EXPECT_FALSE(r[0].rank);
}

TEST(JudgeParse, InlineHeaderContentAndFixtures) {
  const auto r = parse_judge_output(test::read_fixture("judge/batch8_rank_list.txt"), dialogues(8),
                                    CriterionId::inquiry_capability);
  EXPECT_EQ(r[0].score, 4);
  EXPECT_EQ(r[0].rank, 3);
  EXPECT_EQ(r[7].rank, 2);
  EXPECT_EQ(r[2].good, "Covers medication history.");
}

TEST(JudgeParse, ErrorsNameTheField) {
  EXPECT_EQ(field_of(block(1, "6"), 1), "Dialogue 1 Score");
  EXPECT_EQ(field_of(block(1, "three"), 1), "Dialogue 1 Score");
  EXPECT_EQ(field_of(block(1, "3.5"), 1), "Dialogue 1 Score");
  EXPECT_EQ(field_of(block(1, "4"), 2), "Dialogue 2");
  EXPECT_EQ(field_of("Dialogue 1:\nGood: g\nSummary: s\nScore: 2", 1), "Dialogue 1 Bad");
  EXPECT_EQ(field_of(block(1, "4") + "Rank: 1\n" + block(2, "2"), 2), "Rank");
  EXPECT_EQ(field_of(block(1, "4") + block(2, "2") + "Rank: 1, 1", 2), "Rank");
  EXPECT_EQ(field_of(block(1, "4") + block(2, "2") + "Rank: 1, 2, 3", 2), "Rank");
}

TEST(JudgeParse, AcceptsDecoratedScore) {
  const auto r = parse_judge_output(block(1, "**4**/5"), dialogues(1), CriterionId::response_safety);
  EXPECT_EQ(r[0].score, 4);
}

TEST(JudgeBatch, LimitsAndRubric) {
  auto b = test::scripted({test::rule("Criterion: " + rubric(test::prompts(),
                                                             CriterionId::response_accuracy)
                                                          .substr(0, 40),
                                      block(1, "5") + block(2, "1"), "judge")});
  Transcript log;
  const auto r = judge_batch(test::client(b), test::prompts(), dialogues(2),
                             CriterionId::response_accuracy, &log);
  EXPECT_EQ(r[0].score, 5);
  EXPECT_EQ(r[1].score, 1);
  EXPECT_EQ(log.entries()[0].request.temperature, 0.0);
  EXPECT_THROW(judge_batch(test::client(b), test::prompts(), dialogues(9),
                           CriterionId::response_accuracy),
               PreconditionError);
  EXPECT_THROW(judge_batch(test::client(b), test::prompts(), {}, CriterionId::response_accuracy),
               PreconditionError);
}

TEST(Criteria, NamesAndRubrics) {
  EXPECT_EQ(all_criteria().size(), 4u);
  for (auto c : all_criteria()) {
    EXPECT_EQ(criterion_from_string(to_string(c)), c);
    EXPECT_FALSE(rubric(test::prompts(), c).empty());
  }
  EXPECT_EQ(criterion_title(CriterionId::inquiry_capability), "Inquiry Capability");
  EXPECT_FALSE(criterion_from_string("speed"));
}

TEST(Moments, MatchesTwoPassOracle) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> xs(1 + trial % 37);
    for (auto& x : xs) x = std::uniform_int_distribution<int>(1, 5)(rng);
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const auto m = moments(xs);
    EXPECT_NEAR(m.mean, mean, 1e-12);
    EXPECT_NEAR(m.variance, ss / static_cast<double>(xs.size()), 1e-12);
    if (xs.size() > 1) {
      EXPECT_NEAR(m.sample_variance, ss / static_cast<double>(xs.size() - 1), 1e-12);
    } else {
      EXPECT_EQ(m.sample_variance, 0.0);
    }
  }
  EXPECT_THROW(moments({}), PreconditionError);
}

TEST(Aggregate, RejectsMixedCriteria) {
  CriterionResult a, b;
  a.criterion = CriterionId::response_safety;
  b.criterion = CriterionId::response_accuracy;
  a.score = b.score = 3;
  const std::vector<CriterionResult> rs{a, b};
  EXPECT_THROW(aggregate(rs), PreconditionError);
  EXPECT_THROW(aggregate({}), PreconditionError);
}

TEST(Comparison, ParsesFacetsAndReasons) {
  const auto v = parse_comparison(
      "Accuracy: Dialogue 1 wins, it names the cause.\nReasonableness: tie\n"
      "Level of detail: lose, dialogue 2 is more thorough.\nSafety: Tie.\nResult: win",
      CompareProtocol::inquiry_ablation);
  EXPECT_EQ(v.overall, Verdict::win);
  EXPECT_EQ(v.facets.at("accuracy"), Verdict::win);
  EXPECT_EQ(v.facets.at("reasonableness"), Verdict::tie);
  EXPECT_EQ(v.facets.at("level_of_detail"), Verdict::lose);
  EXPECT_EQ(v.facets.at("safety"), Verdict::tie);
  EXPECT_NE(v.reasons.at("accuracy").find("names the cause"), std::string::npos);
}

TEST(Comparison, MissingFacet) {
  try {
    parse_comparison("Result: win\nEthics: tie", CompareProtocol::safety_ablation);
    FAIL();
  } catch (const JudgeParseError& e) {
    EXPECT_EQ(e.field(), "Safety");
  }
  try {
    parse_comparison("Ethics: tie\nSafety: tie", CompareProtocol::safety_ablation);
    FAIL();
  } catch (const JudgeParseError& e) {
    EXPECT_EQ(e.field(), "Result");
  }
}

TEST(Comparison, TallyRejectsOtherProtocol) {
  WinTieLoseTally t(CompareProtocol::safety_ablation);
  EXPECT_EQ(t.facets.size(), 2u);
  ComparisonVerdict v;
  v.protocol = CompareProtocol::inquiry_ablation;
  EXPECT_THROW(t.add(v), PreconditionError);
}

TEST(Comparison, PairUsesCompareTemplate) {
  auto b = test::scripted({test::rule("Ethics: the AI doctor", "Result: lose\nEthics: lose\nSafety: tie",
                                      "compare")});
  const auto v = compare_pair(test::client(b), test::prompts(), "A", "B",
                              CompareProtocol::safety_ablation);
  EXPECT_EQ(v.overall, Verdict::lose);
}

TEST(Validation, TrueFalseWords) {
  EXPECT_EQ(parse_validation("True\nTrue"), (DoctorEditJudgement{true, true}));
  EXPECT_EQ(parse_validation("1. **True** - added.\n2. False: wrong place."),
            (DoctorEditJudgement{true, false}));
  EXPECT_THROW(parse_validation("Yes and yes"), JudgeParseError);
  EXPECT_THROW(parse_validation("True"), JudgeParseError);
}

}  // namespace
}  // namespace copilot
