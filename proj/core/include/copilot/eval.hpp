#pragma once

// Offline evaluation: reference corpus sampling, LLM-as-judge scoring on the
// four criteria, mean/variance aggregation, pairwise win/tie/lose comparison
// and the doctor-edit validator.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "copilot/dialogue.hpp"
#include "copilot/gateway.hpp"
#include "copilot/prompts.hpp"

namespace copilot {

// --- corpus ------------------------------------------------------------------

struct ReferenceTurn {
  Speaker speaker = Speaker::patient;
  std::string text;

  bool operator==(const ReferenceTurn&) const = default;
};

struct ReferenceDialogue {
  std::string id;
  std::string description;
  std::vector<ReferenceTurn> turns;
  std::string diagnosis_notes;

  bool operator==(const ReferenceDialogue&) const = default;
};

/// One corpus line: `{"id", "description", "turns": [{"speaker", "text"}],
/// "diagnosis_notes"}`. Speakers are "patient" or "doctor". Throws
/// PreconditionError on a bad record.
ReferenceDialogue reference_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ReferenceDialogue& d);

/// Every record of a corpus file. Throws FormatError with the line number.
std::vector<ReferenceDialogue> read_corpus(const std::filesystem::path& path);

/// `k` distinct indices out of [0, n), uniformly chosen and deterministic in
/// `seed`. Returned in selection order. Throws CorpusTooSmall when k > n.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

/// Keeps dialogues with more than `min_rounds` turns, then samples
/// `sample_size` of them. Throws CorpusTooSmall.
std::vector<ReferenceDialogue> select_dialogues(std::span<const ReferenceDialogue> corpus,
                                                int min_rounds, std::size_t sample_size,
                                                std::uint64_t seed);
std::vector<ReferenceDialogue> load_corpus(const std::filesystem::path& path, int min_rounds,
                                           std::size_t sample_size, std::uint64_t seed);

/// `Description: ...` followed by `Dialogue:` and one `Patient:`/`Doctor:`
/// line per turn; bound to `{reference_dialogue}`.
std::string render_reference(const ReferenceDialogue& d);

// --- judge -------------------------------------------------------------------

enum class CriterionId {
  inquiry_capability,
  conversational_fluency,
  response_accuracy,
  response_safety,
};

std::string_view to_string(CriterionId c);
std::optional<CriterionId> criterion_from_string(std::string_view s);
std::span<const CriterionId> all_criteria();
/// Column title, e.g. "Inquiry Capability".
std::string_view criterion_title(CriterionId c);
/// Verbatim rubric text for `c`.
const std::string& rubric(const PromptLibrary& prompts, CriterionId c);

inline constexpr std::size_t kJudgeBatchLimit = 8;

struct JudgedDialogue {
  std::string id;
  std::string text;
};

struct CriterionResult {
  std::string dialogue_id;
  CriterionId criterion = CriterionId::inquiry_capability;
  std::string good;
  std::string bad;
  std::string summary;
  int score = 0;
  std::optional<int> rank;
};

/// Parses a judge reply for `dialogues.size()` dialogues. Each dialogue needs
/// a `Dialogue k:` block with `Good:`, `Bad:`, `Summary:` and `Score:` lines.
/// Ranks are optional: either a `Rank: r` line in every block, or one
/// `Rank: r1, r2, ...` line where the i-th number is the rank of dialogue i.
/// Throws JudgeParseError naming the offending field.
std::vector<CriterionResult> parse_judge_output(std::string_view raw,
                                                std::span<const JudgedDialogue> dialogues,
                                                CriterionId criterion);

/// One judge call over 1..batch_limit dialogues.
std::vector<CriterionResult> judge_batch(const LlmClient& judge, const PromptLibrary& prompts,
                                         std::span<const JudgedDialogue> dialogues,
                                         CriterionId criterion, Transcript* log = nullptr,
                                         std::size_t batch_limit = kJudgeBatchLimit);

struct Moments {
  double mean = 0.0;
  /// Population variance.
  double variance = 0.0;
  /// Unbiased sample variance; 0 when n < 2.
  double sample_variance = 0.0;
  std::size_t n = 0;
};

/// Throws PreconditionError on an empty input.
Moments moments(std::span<const double> values);

struct RunStats {
  CriterionId criterion = CriterionId::inquiry_capability;
  double mean = 0.0;
  double variance = 0.0;
  double sample_variance = 0.0;
  std::size_t n = 0;
};

/// Score statistics for results of a single criterion. Throws
/// PreconditionError on empty input or mixed criteria.
RunStats aggregate(std::span<const CriterionResult> results);

// --- pairwise comparison -------------------------------------------------------

enum class Verdict { win, tie, lose };

std::string_view to_string(Verdict v);
std::optional<Verdict> verdict_from_string(std::string_view s);

enum class CompareProtocol { inquiry_ablation, safety_ablation };

std::string_view to_string(CompareProtocol p);
std::optional<CompareProtocol> protocol_from_string(std::string_view s);
/// Facet keys of a protocol, in template order.
std::span<const std::string_view> facets(CompareProtocol p);

struct ComparisonVerdict {
  CompareProtocol protocol = CompareProtocol::inquiry_ablation;
  std::map<std::string, Verdict> facets;
  /// Prose following each facet label.
  std::map<std::string, std::string> reasons;
  Verdict overall = Verdict::tie;
};

/// Reads `Result:` and one line per facet; each takes the first win/tie/lose
/// word after its label. Throws JudgeParseError naming a missing field.
ComparisonVerdict parse_comparison(std::string_view raw, CompareProtocol protocol);

ComparisonVerdict compare_pair(const LlmClient& judge, const PromptLibrary& prompts,
                               std::string_view d1, std::string_view d2, CompareProtocol protocol,
                               Transcript* log = nullptr);

struct WinTieLoseCounts {
  std::size_t win = 0;
  std::size_t tie = 0;
  std::size_t lose = 0;

  std::size_t total() const { return win + tie + lose; }
  void add(Verdict v);
  bool operator==(const WinTieLoseCounts&) const = default;
};

struct WinTieLoseTally {
  CompareProtocol protocol = CompareProtocol::inquiry_ablation;
  WinTieLoseCounts overall;
  std::map<std::string, WinTieLoseCounts> facets;

  explicit WinTieLoseTally(CompareProtocol p);
  /// Throws PreconditionError when the verdict's protocol differs.
  void add(const ComparisonVerdict& v);
};

// --- doctor-edit validation ---------------------------------------------------

struct DoctorEditJudgement {
  bool incorporated = false;
  bool placed_correctly = false;

  bool operator==(const DoctorEditJudgement&) const = default;
};

/// The first two True/False words of the reply, in order.
DoctorEditJudgement parse_validation(std::string_view raw);

DoctorEditJudgement validate_doctor_edit(const LlmClient& judge, const PromptLibrary& prompts,
                                         std::string_view old_text, std::string_view guidance,
                                         std::string_view new_text, Transcript* log = nullptr);

}  // namespace copilot
