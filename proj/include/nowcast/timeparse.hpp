#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace nowcast::timeparse {

constexpr int64_t kMinutesPerDay = 1440;

/// Days from 1970-01-01 for a proleptic Gregorian civil date.
constexpr int64_t days_from_civil(int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = unsigned(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + int64_t(doe) - 719468;
}

void civil_from_days(int64_t z, int& y, unsigned& m, unsigned& d);

bool valid_civil(int y, unsigned m, unsigned d);

/// "YYYY-MM-DD" or "YYYY/MM/DD" → days since epoch.
std::optional<int64_t> parse_date_days(std::string_view s);

/// Call timestamps: "YYYY/MM/DD HH:MM" primary, ISO-8601
/// "YYYY-MM-DD[T ]HH:MM[:SS]" fallback (seconds truncated). Wall-clock
/// local time, no timezone handling. Returns minutes since epoch.
std::optional<int64_t> parse_timestamp_minutes(std::string_view s);

/// "HH:MM" → minute of day.
std::optional<int> parse_time_of_day(std::string_view s);

std::string format_timestamp(int64_t minutes);  // YYYY/MM/DD HH:MM
std::string format_date(int64_t days);          // YYYY-MM-DD

/// Half-open daily window [start, end) in minutes of day; wraps midnight
/// when start > end (e.g. 22:00-07:00).
struct MinuteWindow {
  int start = 22 * 60;
  int end = 7 * 60;

  bool contains(int minute_of_day) const {
    if (start <= end) return minute_of_day >= start && minute_of_day < end;
    return minute_of_day >= start || minute_of_day < end;
  }
};

}  // namespace nowcast::timeparse
