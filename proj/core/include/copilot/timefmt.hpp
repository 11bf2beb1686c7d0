#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace copilot {

/// UTC wall time at one-second resolution.
using Timestamp = std::chrono::sys_seconds;

/// Injectable clock. Production code uses `system_clock_now`.
using Clock = std::function<Timestamp()>;

Timestamp system_clock_now();

/// A clock frozen at `t`.
Clock fixed_clock(Timestamp t);

/// `YYYY/MM/DD HH:MM`, the style used in prompt `{date}` bindings and
/// memory-record headers.
std::string format_minute(Timestamp t);

/// `YYYY/MM/DD`.
std::string format_day(std::chrono::year_month_day d);

/// `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_iso8601(Timestamp t);

/// Accepts `YYYY-MM-DDTHH:MM:SSZ`, `YYYY-MM-DDTHH:MMZ`, `YYYY-MM-DD HH:MM[:SS]`,
/// `YYYY/MM/DD HH:MM` and bare dates in either separator style.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Builds a timestamp from calendar fields; used mostly by tests and fixtures.
Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0, int minute = 0,
                         int second = 0);

}  // namespace copilot
