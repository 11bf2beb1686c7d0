#pragma once

// Registry of the consultation and evaluation prompt templates. Templates are
// text assets (one file per template) pinned by SHA-256 digests compiled into
// the library, so any edit to a prompt is deliberate and shows up in review.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace copilot {

enum class TemplateId {
  classification,
  inquiry,
  diagnosis,
  explanation,
  recommendation,
  safety,
  doctor,
  memory_summary,
  memory_update,
  report,
  virtual_patient,
  judge_scoring,
  compare_inquiry,
  compare_safety,
  validate_doctor,
};

inline constexpr std::size_t kTemplateCount = 15;

std::string_view to_string(TemplateId id);
std::optional<TemplateId> template_from_string(std::string_view name);
std::span<const TemplateId> all_templates();

using Bindings = std::map<std::string, std::string, std::less<>>;

struct PromptTemplate {
  TemplateId id;
  std::string body;
  std::set<std::string> required_placeholders;
};

/// Placeholder names (`{name}`, name = [A-Za-z_][A-Za-z0-9_]*) in order of
/// appearance, duplicates included.
std::vector<std::string> scan_placeholders(std::string_view body);

/// Substitutes every `{name}` with its binding. Substituted text is not
/// rescanned; braces that do not form a placeholder are copied through.
/// Throws MissingBinding for the first unbound placeholder.
std::string substitute(std::string_view body, const Bindings& bindings);

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

class PromptLibrary {
 public:
  /// Loads every template and rubric asset from `dir` and verifies each one
  /// against the compiled-in digest and against `dir/MANIFEST.sha256`.
  /// Throws DigestMismatch or ConfigError.
  static PromptLibrary load(const std::filesystem::path& dir);

  /// Library loaded once from the default asset directory: $COPILOT_PROMPT_DIR,
  /// then the source tree, then the install prefix.
  static const PromptLibrary& builtin();
  static std::filesystem::path default_dir();

  const PromptTemplate& get(TemplateId id) const;

  std::string render(TemplateId id, const Bindings& bindings) const;
  /// Throws UnknownTemplate for names outside the registry.
  std::string render(std::string_view id, const Bindings& bindings) const;

  /// Renders the judge-scoring template for `dialogues.size()` dialogues: the
  /// `Dialogue 1: {d1} / …… / Dialogue n: {dn}` block is unrolled into one
  /// line per dialogue before substitution.
  std::string render_judge(std::string_view criterion,
                           std::span<const std::string> dialogues) const;

  /// Every template with its required placeholder set, in registry order.
  std::vector<std::pair<TemplateId, std::set<std::string>>> list_templates() const;

  /// Non-template text assets (judge rubrics), by file stem.
  const std::string& asset(std::string_view stem) const;

 private:
  std::map<TemplateId, PromptTemplate> templates_;
  std::map<std::string, std::string, std::less<>> assets_;
};

}  // namespace copilot
