#include <algorithm>
#include <array>
#include <charconv>

#include "copilot/errors.hpp"
#include "copilot/eval.hpp"
#include "text.hpp"

namespace copilot {

namespace {

constexpr std::array<CriterionId, 4> kCriteria = {
    CriterionId::inquiry_capability, CriterionId::conversational_fluency,
    CriterionId::response_accuracy, CriterionId::response_safety};

constexpr std::array<std::string_view, 4> kInquiryFacets = {"accuracy", "reasonableness",
                                                            "level_of_detail", "safety"};
constexpr std::array<std::string_view, 2> kSafetyFacets = {"ethics", "safety"};

std::string_view strip_markup(std::string_view s) {
  s = trim(s);
  while (!s.empty() && (s.front() == '*' || s.front() == '#' || s.front() == '-' ||
                        s.front() == '_' || s.front() == ' ')) {
    s.remove_prefix(1);
  }
  return s;
}

// Matches "<label>:" at the start of `line` (case-insensitive, markdown
// emphasis tolerated). Returns the text after the colon.
std::optional<std::string_view> after_label(std::string_view line, std::string_view label) {
  auto s = strip_markup(line);
  if (s.size() < label.size() || to_lower(s.substr(0, label.size())) != to_lower(label)) {
    return std::nullopt;
  }
  s.remove_prefix(label.size());
  while (!s.empty() && (s.front() == '*' || s.front() == '_' || s.front() == ' ')) s.remove_prefix(1);
  if (s.empty() || s.front() != ':') return std::nullopt;
  s.remove_prefix(1);
  while (!s.empty() && (s.front() == '*' || s.front() == '_')) s.remove_prefix(1);
  return trim(s);
}

// "Dialogue <k>" header; returns k and whatever follows the colon.
std::optional<std::pair<int, std::string_view>> dialogue_header(std::string_view line) {
  auto s = strip_markup(line);
  constexpr std::string_view kWord = "dialogue";
  if (s.size() <= kWord.size() || to_lower(s.substr(0, kWord.size())) != kWord) return std::nullopt;
  s.remove_prefix(kWord.size());
  s = trim(s);
  int k = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), k);
  if (ec != std::errc{} || p == s.data()) return std::nullopt;
  s.remove_prefix(static_cast<std::size_t>(p - s.data()));
  while (!s.empty() && (s.front() == '*' || s.front() == '_' || s.front() == ' ')) s.remove_prefix(1);
  if (!s.empty() && s.front() != ':') return std::nullopt;
  if (!s.empty()) s.remove_prefix(1);
  while (!s.empty() && (s.front() == '*' || s.front() == '_')) s.remove_prefix(1);
  return std::pair{k, trim(s)};
}

std::vector<std::string> lower_words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::optional<Verdict> first_verdict(std::string_view s) {
  for (const auto& w : lower_words(s)) {
    if (w == "win" || w == "wins") return Verdict::win;
    if (w == "tie" || w == "ties" || w == "tied") return Verdict::tie;
    if (w == "lose" || w == "loses") return Verdict::lose;
  }
  return std::nullopt;
}

struct JudgeBlock {
  std::optional<std::string> good, bad, summary, score, rank;
};

std::vector<int> parse_int_list(std::string_view s) {
  std::vector<int> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (std::isdigit(static_cast<unsigned char>(s[i]))) {
      int v = 0;
      auto [p, ec] = std::from_chars(s.data() + i, s.data() + s.size(), v);
      if (ec != std::errc{}) break;
      out.push_back(v);
      i = static_cast<std::size_t>(p - s.data());
    } else {
      ++i;
    }
  }
  return out;
}

int parse_score(std::string_view text, int k, const std::string& raw) {
  auto s = trim(text);
  while (!s.empty() && (s.front() == '*' || s.front() == '_' || s.front() == '[')) s.remove_prefix(1);
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  const auto field = "Dialogue " + std::to_string(k) + " Score";
  if (ec != std::errc{} || p == s.data()) {
    throw JudgeParseError("score is not a number: '" + std::string(trim(text)) + "'", field, raw);
  }
  const auto rest = s.substr(static_cast<std::size_t>(p - s.data()));
  if (rest.size() >= 2 && rest[0] == '.' && std::isdigit(static_cast<unsigned char>(rest[1]))) {
    throw JudgeParseError("score is not an integer: '" + std::string(trim(text)) + "'", field, raw);
  }
  if (v < 1 || v > 5) {
    throw JudgeParseError("score " + std::to_string(v) + " is outside 1..5", field, raw);
  }
  return v;
}

void check_permutation(const std::vector<int>& ranks, const std::string& raw) {
  std::vector<int> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != static_cast<int>(i) + 1) {
      throw JudgeParseError("ranks are not a permutation of 1.." + std::to_string(ranks.size()),
                            "Rank", raw);
    }
  }
}

}  // namespace

std::string_view to_string(CriterionId c) {
  switch (c) {
    case CriterionId::inquiry_capability: return "inquiry_capability";
    case CriterionId::conversational_fluency: return "conversational_fluency";
    case CriterionId::response_accuracy: return "response_accuracy";
    case CriterionId::response_safety: return "response_safety";
  }
  return "inquiry_capability";
}

std::optional<CriterionId> criterion_from_string(std::string_view s) {
  for (auto c : kCriteria) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::span<const CriterionId> all_criteria() { return kCriteria; }

std::string_view criterion_title(CriterionId c) {
  switch (c) {
    case CriterionId::inquiry_capability: return "Inquiry Capability";
    case CriterionId::conversational_fluency: return "Conversational Fluency";
    case CriterionId::response_accuracy: return "Response Accuracy";
    case CriterionId::response_safety: return "Response Safety";
  }
  return "";
}

const std::string& rubric(const PromptLibrary& prompts, CriterionId c) {
  return prompts.asset("criterion_" + std::string(to_string(c)));
}

std::vector<CriterionResult> parse_judge_output(std::string_view raw_view,
                                                std::span<const JudgedDialogue> dialogues,
                                                CriterionId criterion) {
  const std::string raw(raw_view);
  const int n = static_cast<int>(dialogues.size());
  std::vector<std::optional<JudgeBlock>> blocks(dialogues.size());
  std::optional<std::string> global_rank;
  JudgeBlock* cur = nullptr;
  std::string* field = nullptr;

  for (auto line : split_lines(raw_view)) {
    if (auto hdr = dialogue_header(line)) {
      const auto [k, rest] = *hdr;
      if (k < 1 || k > n) {
        throw JudgeParseError("judge reply names dialogue " + std::to_string(k) + " of " +
                                  std::to_string(n),
                              "Dialogue", raw);
      }
      auto& slot = blocks[static_cast<std::size_t>(k - 1)];
      if (slot) {
        throw JudgeParseError("dialogue " + std::to_string(k) + " is scored twice",
                              "Dialogue " + std::to_string(k), raw);
      }
      slot.emplace();
      cur = &*slot;
      field = nullptr;
      line = rest;
      if (trim(line).empty()) continue;
    }
    bool labelled = false;
    for (auto label : {"Good", "Bad", "Summary", "Score", "Ranking", "Rank"}) {
      auto rest = after_label(line, label);
      if (!rest) continue;
      labelled = true;
      const std::string_view l = label;
      if (l == "Rank" || l == "Ranking") {
        if (!cur || parse_int_list(*rest).size() > 1) {
          global_rank = std::string(*rest);
          field = &*global_rank;
        } else {
          cur->rank = std::string(*rest);
          field = &*cur->rank;
        }
        break;
      }
      if (!cur) {
        field = nullptr;
        break;
      }
      auto& slot = l == "Good" ? cur->good : l == "Bad" ? cur->bad : l == "Summary" ? cur->summary
                                                                                      : cur->score;
      slot = std::string(*rest);
      field = &*slot;
      break;
    }
    if (!labelled && field) {
      if (!field->empty()) *field += '\n';
      *field += trim(line);
    }
  }

  std::vector<CriterionResult> out;
  for (int k = 1; k <= n; ++k) {
    const auto& b = blocks[static_cast<std::size_t>(k - 1)];
    const auto prefix = "Dialogue " + std::to_string(k);
    if (!b) throw JudgeParseError("no block for " + prefix, prefix, raw);
    for (auto [name, value] : {std::pair{"Good", &b->good}, std::pair{"Bad", &b->bad},
                               std::pair{"Summary", &b->summary}, std::pair{"Score", &b->score}}) {
      if (!*value) throw JudgeParseError(prefix + " lacks " + name, prefix + " " + name, raw);
    }
    CriterionResult r;
    r.dialogue_id = dialogues[static_cast<std::size_t>(k - 1)].id;
    r.criterion = criterion;
    r.good = std::string(trim(*b->good));
    r.bad = std::string(trim(*b->bad));
    r.summary = std::string(trim(*b->summary));
    r.score = parse_score(*b->score, k, raw);
    out.push_back(std::move(r));
  }

  const auto with_rank = std::count_if(blocks.begin(), blocks.end(),
                                       [](const auto& b) { return b && b->rank.has_value(); });
  std::vector<int> ranks;
  if (with_rank > 0) {
    if (with_rank != n) throw JudgeParseError("only some dialogues carry a rank", "Rank", raw);
    for (const auto& b : blocks) {
      const auto v = parse_int_list(*b->rank);
      if (v.size() != 1) throw JudgeParseError("bad rank '" + *b->rank + "'", "Rank", raw);
      ranks.push_back(v.front());
    }
  } else if (global_rank) {
    ranks = parse_int_list(*global_rank);
    if (static_cast<int>(ranks.size()) != n) {
      throw JudgeParseError("rank list has " + std::to_string(ranks.size()) + " entries for " +
                                std::to_string(n) + " dialogues",
                            "Rank", raw);
    }
  }
  if (!ranks.empty()) {
    check_permutation(ranks, raw);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = ranks[i];
  }
  return out;
}

std::vector<CriterionResult> judge_batch(const LlmClient& judge, const PromptLibrary& prompts,
                                         std::span<const JudgedDialogue> dialogues,
                                         CriterionId criterion, Transcript* log,
                                         std::size_t batch_limit) {
  if (dialogues.empty() || dialogues.size() > batch_limit) {
    throw PreconditionError("judge batch needs 1.." + std::to_string(batch_limit) +
                            " dialogues, got " + std::to_string(dialogues.size()));
  }
  std::vector<std::string> texts;
  for (const auto& d : dialogues) texts.push_back(d.text);
  const auto prompt = prompts.render_judge(rubric(prompts, criterion), texts);
  const auto reply = judge.ask("judge", prompt, 0.0, log);
  return parse_judge_output(reply, dialogues, criterion);
}

Moments moments(std::span<const double> values) {
  if (values.empty()) throw PreconditionError("cannot aggregate an empty score list");
  // Welford's update.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double x : values) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }
  Moments m;
  m.n = n;
  m.mean = mean;
  m.variance = std::max(0.0, m2 / static_cast<double>(n));
  m.sample_variance = n > 1 ? std::max(0.0, m2 / static_cast<double>(n - 1)) : 0.0;
  return m;
}

RunStats aggregate(std::span<const CriterionResult> results) {
  if (results.empty()) throw PreconditionError("cannot aggregate an empty result list");
  std::vector<double> scores;
  for (const auto& r : results) {
    if (r.criterion != results.front().criterion) {
      throw PreconditionError("aggregate expects results of a single criterion");
    }
    scores.push_back(r.score);
  }
  const auto m = moments(scores);
  return {results.front().criterion, m.mean, m.variance, m.sample_variance, m.n};
}

// --- comparison -----------------------------------------------------------------

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::win: return "win";
    case Verdict::tie: return "tie";
    case Verdict::lose: return "lose";
  }
  return "tie";
}

std::optional<Verdict> verdict_from_string(std::string_view s) {
  const auto l = to_lower(trim(s));
  if (l == "win") return Verdict::win;
  if (l == "tie") return Verdict::tie;
  if (l == "lose") return Verdict::lose;
  return std::nullopt;
}

std::string_view to_string(CompareProtocol p) {
  return p == CompareProtocol::inquiry_ablation ? "inquiry_ablation" : "safety_ablation";
}

std::optional<CompareProtocol> protocol_from_string(std::string_view s) {
  if (s == "inquiry_ablation" || s == "inquiry") return CompareProtocol::inquiry_ablation;
  if (s == "safety_ablation" || s == "safety") return CompareProtocol::safety_ablation;
  return std::nullopt;
}

std::span<const std::string_view> facets(CompareProtocol p) {
  if (p == CompareProtocol::inquiry_ablation) return kInquiryFacets;
  return kSafetyFacets;
}

ComparisonVerdict parse_comparison(std::string_view raw_view, CompareProtocol protocol) {
  const std::string raw(raw_view);
  // Facet key -> label as written in the template.
  std::vector<std::pair<std::string, std::string>> labels{{"result", "Result"}};
  for (auto f : facets(protocol)) {
    std::string label(f);
    std::replace(label.begin(), label.end(), '_', ' ');
    label[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
    labels.emplace_back(std::string(f), std::move(label));
  }

  // Every labelled section with its continuation lines.
  std::vector<std::pair<std::string, std::string>> sections;
  for (auto line : split_lines(raw_view)) {
    bool labelled = false;
    for (const auto& [key, label] : labels) {
      if (auto rest = after_label(line, label)) {
        sections.emplace_back(key, std::string(*rest));
        labelled = true;
        break;
      }
    }
    if (!labelled && !sections.empty() && !trim(line).empty()) {
      auto& text = sections.back().second;
      if (dialogue_header(line)) continue;
      if (!text.empty()) text += '\n';
      text += trim(line);
    }
  }

  ComparisonVerdict v;
  v.protocol = protocol;
  bool have_overall = false;
  for (const auto& [key, label] : labels) {
    std::optional<Verdict> found;
    std::string reason;
    for (const auto& [k, text] : sections) {
      if (k != key) continue;
      if (auto verdict = first_verdict(text)) {
        found = verdict;
        reason = text;
        break;
      }
    }
    if (!found) throw JudgeParseError("no win/tie/lose verdict for " + label, label, raw);
    if (key == "result") {
      v.overall = *found;
      have_overall = true;
    } else {
      v.facets[key] = *found;
      v.reasons[key] = reason;
    }
  }
  if (!have_overall) throw JudgeParseError("missing overall result", "Result", raw);
  return v;
}

ComparisonVerdict compare_pair(const LlmClient& judge, const PromptLibrary& prompts,
                               std::string_view d1, std::string_view d2, CompareProtocol protocol,
                               Transcript* log) {
  if (trim(d1).empty() || trim(d2).empty()) {
    throw PreconditionError("comparison needs two non-empty dialogues");
  }
  const auto id = protocol == CompareProtocol::inquiry_ablation ? TemplateId::compare_inquiry
                                                                : TemplateId::compare_safety;
  const auto prompt = prompts.render(id, {{"d1", std::string(d1)}, {"d2", std::string(d2)}});
  return parse_comparison(judge.ask("compare", prompt, 0.0, log), protocol);
}

void WinTieLoseCounts::add(Verdict v) {
  switch (v) {
    case Verdict::win: ++win; break;
    case Verdict::tie: ++tie; break;
    case Verdict::lose: ++lose; break;
  }
}

WinTieLoseTally::WinTieLoseTally(CompareProtocol p) : protocol(p) {
  for (auto f : copilot::facets(p)) facets[std::string(f)] = {};
}

void WinTieLoseTally::add(const ComparisonVerdict& v) {
  if (v.protocol != protocol) throw PreconditionError("verdict protocol does not match the tally");
  overall.add(v.overall);
  for (const auto& [facet, verdict] : v.facets) facets.at(facet).add(verdict);
}

// --- doctor-edit validation ---------------------------------------------------

DoctorEditJudgement parse_validation(std::string_view raw) {
  std::vector<bool> seen;
  for (const auto& w : lower_words(raw)) {
    if (w == "true") seen.push_back(true);
    if (w == "false") seen.push_back(false);
    if (seen.size() == 2) break;
  }
  if (seen.size() < 2) {
    throw JudgeParseError("expected two True/False judgements", "judgement", std::string(raw));
  }
  return {seen[0], seen[1]};
}

DoctorEditJudgement validate_doctor_edit(const LlmClient& judge, const PromptLibrary& prompts,
                                         std::string_view old_text, std::string_view guidance,
                                         std::string_view new_text, Transcript* log) {
  if (trim(old_text).empty() || trim(guidance).empty() || trim(new_text).empty()) {
    throw PreconditionError("doctor-edit validation needs old, guidance and new text");
  }
  const auto prompt = prompts.render(TemplateId::validate_doctor, {{"old", std::string(old_text)},
                                                                   {"doctor", std::string(guidance)},
                                                                   {"new", std::string(new_text)}});
  return parse_validation(judge.ask("validate_doctor", prompt, 0.0, log));
}

}  // namespace copilot
