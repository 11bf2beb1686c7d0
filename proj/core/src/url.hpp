#pragma once

#include <string>
#include <string_view>

namespace copilot {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;    // no trailing slash
};

inline UrlParts split_url(std::string_view url) {
  UrlParts out;
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string_view::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  if (path_start == std::string_view::npos) {
    out.origin = std::string(url);
  } else {
    out.origin = std::string(url.substr(0, path_start));
    out.path = std::string(url.substr(path_start));
  }
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

}  // namespace copilot
