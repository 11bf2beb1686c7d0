#include "copilot/search.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "copilot/errors.hpp"
#include "text.hpp"
#include "url.hpp"

namespace copilot {

namespace {

class NullSearch final : public SearchProvider {
 public:
  std::string search(std::string_view) override { return {}; }
};

class HttpSearch final : public SearchProvider {
 public:
  explicit HttpSearch(SearchConfig cfg) : cfg_(std::move(cfg)), url_(split_url(cfg_.endpoint)) {
    if (url_.origin.empty()) throw ConfigError("search endpoint is empty");
  }

  std::string search(std::string_view query) override {
    httplib::Client cli(url_.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    if (!cfg_.api_key.empty()) cli.set_bearer_token_auth(cfg_.api_key);

    httplib::Params params{{"q", std::string(query)}, {"k", std::to_string(cfg_.top_k)}};
    auto res = cli.Get(url_.path.empty() ? "/" : url_.path, params, httplib::Headers{});
    if (!res) throw TransportError("search request failed: " + httplib::to_string(res.error()), 0, true);
    if (res->status != 200) {
      throw TransportError("search provider returned HTTP " + std::to_string(res->status),
                           res->status, false);
    }
    const auto doc = nlohmann::json::parse(res->body);
    std::string joined;
    std::size_t taken = 0;
    for (const auto& s : doc.at("snippets")) {
      if (taken++ >= cfg_.top_k) break;
      const auto text = std::string(trim(s.get<std::string>()));
      if (text.empty()) continue;
      if (!joined.empty()) joined += '\n';
      joined += text;
    }
    return truncate_utf8(std::move(joined), cfg_.byte_budget);
  }

 private:
  SearchConfig cfg_;
  UrlParts url_;
};

}  // namespace

std::shared_ptr<SearchProvider> make_null_search() { return std::make_shared<NullSearch>(); }

std::shared_ptr<SearchProvider> make_http_search(const SearchConfig& cfg) {
  return std::make_shared<HttpSearch>(cfg);
}

std::shared_ptr<SearchProvider> make_search_provider(const SearchConfig& cfg) {
  if (cfg.kind == SearchConfig::Kind::http) return make_http_search(cfg);
  return make_null_search();
}

std::string search_snippets(SearchProvider& provider, std::string_view query) {
  try {
    return provider.search(query);
  } catch (const std::exception& e) {
    spdlog::warn("search failed, continuing without snippets: {}", e.what());
    return {};
  }
}

}  // namespace copilot
