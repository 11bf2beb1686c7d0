#include "copilot/timefmt.hpp"

#include <charconv>
#include <cstdio>

namespace copilot {

namespace chr = std::chrono;

Timestamp system_clock_now() {
  return chr::time_point_cast<chr::seconds>(chr::system_clock::now());
}

Clock fixed_clock(Timestamp t) {
  return [t] { return t; };
}

namespace {

struct Fields {
  int year;
  unsigned month, day;
  long hour, minute, second;
};

Fields split(Timestamp t) {
  const auto days = chr::floor<chr::days>(t);
  const chr::year_month_day ymd{days};
  const auto tod = chr::hh_mm_ss<chr::seconds>{t - days};
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
          static_cast<unsigned>(ymd.day()), static_cast<long>(tod.hours().count()),
          static_cast<long>(tod.minutes().count()), static_cast<long>(tod.seconds().count())};
}

// Reads exactly `width` digits at `pos`.
bool read_int(std::string_view s, std::size_t& pos, std::size_t width, int& out) {
  if (pos + width > s.size()) return false;
  for (std::size_t i = 0; i < width; ++i) {
    if (s[pos + i] < '0' || s[pos + i] > '9') return false;
  }
  std::from_chars(s.data() + pos, s.data() + pos + width, out);
  pos += width;
  return true;
}

bool expect(std::string_view s, std::size_t& pos, std::string_view any_of) {
  if (pos >= s.size() || any_of.find(s[pos]) == std::string_view::npos) return false;
  ++pos;
  return true;
}

}  // namespace

std::string format_minute(Timestamp t) {
  const auto f = split(t);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d/%02u/%02u %02ld:%02ld", f.year, f.month, f.day, f.hour,
                f.minute);
  return buf;
}

std::string format_day(chr::year_month_day d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d/%02u/%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::string format_iso8601(Timestamp t) {
  const auto f = split(t);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", f.year, f.month, f.day,
                f.hour, f.minute, f.second);
  return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);

  std::size_t pos = 0;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!read_int(s, pos, 4, y) || !expect(s, pos, "-/") || !read_int(s, pos, 2, mo) ||
      !expect(s, pos, "-/") || !read_int(s, pos, 2, d)) {
    return std::nullopt;
  }
  if (pos < s.size()) {
    if (!expect(s, pos, "T ") || !read_int(s, pos, 2, h) || !expect(s, pos, ":") ||
        !read_int(s, pos, 2, mi)) {
      return std::nullopt;
    }
    if (pos < s.size() && s[pos] == ':') {
      ++pos;
      if (!read_int(s, pos, 2, sec)) return std::nullopt;
    }
    if (pos < s.size() && s[pos] == 'Z') ++pos;
    if (pos != s.size()) return std::nullopt;
  }
  const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(mo)},
                                chr::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
  return chr::sys_days{ymd} + chr::hours{h} + chr::minutes{mi} + chr::seconds{sec};
}

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour, int minute,
                         int second) {
  const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  return chr::sys_days{ymd} + chr::hours{hour} + chr::minutes{minute} + chr::seconds{second};
}

}  // namespace copilot
