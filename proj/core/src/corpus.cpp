#include <fstream>
#include <numeric>
#include <random>

#include "copilot/errors.hpp"
#include "copilot/eval.hpp"
#include "text.hpp"

namespace copilot {

using json = nlohmann::json;

namespace {

// Uniform integer in [0, bound) by rejection; std distributions are not
// portable across standard libraries, and samples must reproduce everywhere.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

Speaker reference_speaker(std::string_view s) {
  const auto l = to_lower(trim(s));
  if (l == "patient") return Speaker::patient;
  if (l == "doctor" || l == "copilot") return Speaker::copilot;
  throw PreconditionError("unknown speaker '" + std::string(s) + "'");
}

}  // namespace

ReferenceDialogue reference_from_json(const json& j) {
  if (!j.is_object()) throw PreconditionError("corpus record must be an object");
  ReferenceDialogue d;
  try {
    d.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    d.description = j.value("description", "");
    d.diagnosis_notes = j.value("diagnosis_notes", "");
    for (const auto& t : j.at("turns")) {
      const auto& who = t.contains("speaker") ? t.at("speaker") : t.at("role");
      d.turns.push_back({reference_speaker(who.get<std::string>()), t.at("text").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw PreconditionError(std::string("bad corpus record: ") + e.what());
  }
  if (d.turns.empty()) throw PreconditionError("dialogue '" + d.id + "' has no turns");
  return d;
}

json to_json(const ReferenceDialogue& d) {
  json turns = json::array();
  for (const auto& t : d.turns) {
    turns.push_back({{"speaker", t.speaker == Speaker::patient ? "patient" : "doctor"},
                     {"text", t.text}});
  }
  return {{"id", d.id},
          {"description", d.description},
          {"turns", std::move(turns)},
          {"diagnosis_notes", d.diagnosis_notes}};
}

std::vector<ReferenceDialogue> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read corpus " + path.string());
  std::vector<ReferenceDialogue> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      out.push_back(reference_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), n);
    } catch (const PreconditionError& e) {
      throw FormatError(e.what(), n);
    }
  }
  return out;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n) {
    throw CorpusTooSmall("requested " + std::to_string(k) + " dialogues but only " +
                         std::to_string(n) + " are eligible");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(bounded(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::vector<ReferenceDialogue> select_dialogues(std::span<const ReferenceDialogue> corpus,
                                                int min_rounds, std::size_t sample_size,
                                                std::uint64_t seed) {
  std::vector<const ReferenceDialogue*> eligible;
  for (const auto& d : corpus) {
    if (static_cast<long long>(d.turns.size()) > min_rounds) eligible.push_back(&d);
  }
  std::vector<ReferenceDialogue> out;
  for (auto i : sample_indices(eligible.size(), sample_size, seed)) out.push_back(*eligible[i]);
  return out;
}

std::vector<ReferenceDialogue> load_corpus(const std::filesystem::path& path, int min_rounds,
                                           std::size_t sample_size, std::uint64_t seed) {
  const auto corpus = read_corpus(path);
  return select_dialogues(corpus, min_rounds, sample_size, seed);
}

std::string render_reference(const ReferenceDialogue& d) {
  std::string out = "Description: " + d.description + "\nDialogue:";
  for (const auto& t : d.turns) {
    out += t.speaker == Speaker::patient ? "\nPatient: " : "\nDoctor: ";
    out += t.text;
  }
  return out;
}

}  // namespace copilot
