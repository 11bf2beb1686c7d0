#pragma once

// Web search snippets for the explanation and recommendation prompts.
// Retrieval is best-effort: failures yield an empty string and a warning.

#include <memory>
#include <string>
#include <string_view>

#include "copilot/config.hpp"

namespace copilot {

class SearchProvider {
 public:
  virtual ~SearchProvider() = default;
  /// May throw; callers go through search_snippets().
  virtual std::string search(std::string_view query) = 0;
};

/// Always returns "".
std::shared_ptr<SearchProvider> make_null_search();

/// GET `<endpoint>?q=<query>&k=<top_k>` expecting `{"snippets": [...]}`.
/// Snippets are joined with newlines and cut to `byte_budget` bytes.
std::shared_ptr<SearchProvider> make_http_search(const SearchConfig& cfg);

std::shared_ptr<SearchProvider> make_search_provider(const SearchConfig& cfg);

/// Calls the provider and converts any failure into "" plus a logged warning.
std::string search_snippets(SearchProvider& provider, std::string_view query);

}  // namespace copilot
