#include "copilot/prompts.hpp"

#include <array>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "copilot/errors.hpp"

namespace copilot {

namespace fs = std::filesystem;

namespace {

constexpr std::array<TemplateId, kTemplateCount> kAll = {
    TemplateId::classification, TemplateId::inquiry,         TemplateId::diagnosis,
    TemplateId::explanation,    TemplateId::recommendation,  TemplateId::safety,
    TemplateId::doctor,         TemplateId::memory_summary,  TemplateId::memory_update,
    TemplateId::report,         TemplateId::virtual_patient, TemplateId::judge_scoring,
    TemplateId::compare_inquiry, TemplateId::compare_safety, TemplateId::validate_doctor,
};

const std::map<std::string, std::string, std::less<>> kPinnedDigests = {
#include "prompt_digests.inc"
};

constexpr std::string_view kJudgeBlock = "Dialogue 1: {d1}\n……\nDialogue n: {dn}";

bool ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

// Length of the placeholder starting at `pos` (including braces), or 0.
std::size_t placeholder_at(std::string_view s, std::size_t pos) {
  if (s[pos] != '{' || pos + 1 >= s.size() || !ident_start(s[pos + 1])) return 0;
  std::size_t end = pos + 1;
  while (end < s.size() && ident_char(s[end])) ++end;
  if (end >= s.size() || s[end] != '}') return 0;
  return end - pos + 1;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read prompt asset " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string, std::less<>> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("prompt digest manifest missing: " + path.string());
  std::map<std::string, std::string, std::less<>> out;
  std::string digest, file;
  while (in >> digest >> file) {
    if (!file.empty() && file.front() == '*') file.erase(0, 1);
    out[fs::path(file).stem().string()] = digest;
  }
  return out;
}

}  // namespace

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::classification: return "classification";
    case TemplateId::inquiry: return "inquiry";
    case TemplateId::diagnosis: return "diagnosis";
    case TemplateId::explanation: return "explanation";
    case TemplateId::recommendation: return "recommendation";
    case TemplateId::safety: return "safety";
    case TemplateId::doctor: return "doctor";
    case TemplateId::memory_summary: return "memory_summary";
    case TemplateId::memory_update: return "memory_update";
    case TemplateId::report: return "report";
    case TemplateId::virtual_patient: return "virtual_patient";
    case TemplateId::judge_scoring: return "judge_scoring";
    case TemplateId::compare_inquiry: return "compare_inquiry";
    case TemplateId::compare_safety: return "compare_safety";
    case TemplateId::validate_doctor: return "validate_doctor";
  }
  return "unknown";
}

std::optional<TemplateId> template_from_string(std::string_view name) {
  for (auto id : kAll) {
    if (to_string(id) == name) return id;
  }
  return std::nullopt;
}

std::span<const TemplateId> all_templates() { return kAll; }

std::vector<std::string> scan_placeholders(std::string_view body) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (auto len = placeholder_at(body, i)) {
      out.emplace_back(body.substr(i + 1, len - 2));
      i += len - 1;
    }
  }
  return out;
}

std::string substitute(std::string_view body, const Bindings& bindings) {
  std::string out;
  out.reserve(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (auto len = placeholder_at(body, i)) {
      const auto name = body.substr(i + 1, len - 2);
      auto it = bindings.find(name);
      if (it == bindings.end()) throw MissingBinding(std::string(name));
      out += it->second;
      i += len - 1;
    } else {
      out += body[i];
    }
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

PromptLibrary PromptLibrary::load(const fs::path& dir) {
  const auto manifest = read_manifest(dir / "MANIFEST.sha256");
  PromptLibrary lib;
  for (const auto& [stem, pinned] : kPinnedDigests) {
    auto text = read_file(dir / (stem + ".txt"));
    const auto actual = sha256_hex(text);
    if (actual != pinned) {
      throw DigestMismatch("prompt asset '" + stem + "' does not match its pinned digest");
    }
    auto m = manifest.find(stem);
    if (m == manifest.end() || m->second != pinned) {
      throw DigestMismatch("manifest entry for '" + stem + "' disagrees with the pinned digest");
    }
    if (auto id = template_from_string(stem)) {
      const auto names = scan_placeholders(text);
      lib.templates_.emplace(*id, PromptTemplate{*id, std::move(text),
                                                 std::set<std::string>(names.begin(), names.end())});
    } else {
      lib.assets_.emplace(stem, std::move(text));
    }
  }
  for (auto id : kAll) {
    if (!lib.templates_.count(id)) {
      throw ConfigError("prompt template '" + std::string(to_string(id)) + "' is not registered");
    }
  }
  return lib;
}

fs::path PromptLibrary::default_dir() {
  if (const char* env = std::getenv("COPILOT_PROMPT_DIR"); env && *env) return env;
  const fs::path source = COPILOT_SOURCE_PROMPT_DIR;
  if (fs::exists(source / "MANIFEST.sha256")) return source;
  return COPILOT_INSTALLED_PROMPT_DIR;
}

const PromptLibrary& PromptLibrary::builtin() {
  static const PromptLibrary lib = load(default_dir());
  return lib;
}

const PromptTemplate& PromptLibrary::get(TemplateId id) const { return templates_.at(id); }

std::string PromptLibrary::render(TemplateId id, const Bindings& bindings) const {
  return substitute(get(id).body, bindings);
}

std::string PromptLibrary::render(std::string_view id, const Bindings& bindings) const {
  auto tid = template_from_string(id);
  if (!tid) throw UnknownTemplate("unknown prompt template '" + std::string(id) + "'");
  return render(*tid, bindings);
}

std::string PromptLibrary::render_judge(std::string_view criterion,
                                        std::span<const std::string> dialogues) const {
  if (dialogues.empty()) throw PreconditionError("judge prompt needs at least one dialogue");
  const auto& body = get(TemplateId::judge_scoring).body;
  const auto at = body.find(kJudgeBlock);
  if (at == std::string::npos) throw ConfigError("judge template lacks its dialogue block");

  Bindings bindings{{"criterion", std::string(criterion)}};
  std::string unrolled;
  for (std::size_t i = 0; i < dialogues.size(); ++i) {
    const auto key = "d" + std::to_string(i + 1);
    if (i) unrolled += '\n';
    unrolled += "Dialogue " + std::to_string(i + 1) + ": {" + key + "}";
    bindings[key] = dialogues[i];
  }
  std::string expanded = body.substr(0, at) + unrolled + body.substr(at + kJudgeBlock.size());
  return substitute(expanded, bindings);
}

std::vector<std::pair<TemplateId, std::set<std::string>>> PromptLibrary::list_templates() const {
  std::vector<std::pair<TemplateId, std::set<std::string>>> out;
  for (auto id : kAll) out.emplace_back(id, get(id).required_placeholders);
  return out;
}

const std::string& PromptLibrary::asset(std::string_view stem) const {
  auto it = assets_.find(stem);
  if (it == assets_.end()) throw ConfigError("no prompt asset named '" + std::string(stem) + "'");
  return it->second;
}

}  // namespace copilot
