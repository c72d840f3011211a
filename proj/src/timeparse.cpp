#include "nowcast/timeparse.hpp"

#include <cstdio>

namespace nowcast::timeparse {

namespace {

bool parse_fixed_uint(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  int v = 0;
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i) {
    const char c = s[i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

}  // namespace

void civil_from_days(int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = unsigned(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t yy = int64_t(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = int(yy + (m <= 2));
}

bool valid_civil(int y, unsigned m, unsigned d) {
  if (m < 1 || m > 12 || d < 1) return false;
  static const unsigned lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  unsigned max_d = lengths[m - 1];
  const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  if (m == 2 && leap) max_d = 29;
  return d <= max_d;
}

std::optional<int64_t> parse_date_days(std::string_view s) {
  if (s.size() != 10) return std::nullopt;
  const char sep = s[4];
  if ((sep != '-' && sep != '/') || s[7] != sep) return std::nullopt;
  int y, m, d;
  if (!parse_fixed_uint(s, 0, 4, y) || !parse_fixed_uint(s, 5, 2, m) || !parse_fixed_uint(s, 8, 2, d))
    return std::nullopt;
  if (!valid_civil(y, unsigned(m), unsigned(d))) return std::nullopt;
  return days_from_civil(y, unsigned(m), unsigned(d));
}

std::optional<int64_t> parse_timestamp_minutes(std::string_view s) {
  // strip an optional trailing ":SS"
  if (s.size() == 19 && s[16] == ':') s = s.substr(0, 16);
  if (s.size() != 16) return std::nullopt;
  const char date_sep = s[4];
  if (date_sep != '/' && date_sep != '-') return std::nullopt;
  if (s[7] != date_sep) return std::nullopt;
  const char mid = s[10];
  if (mid != ' ' && mid != 'T') return std::nullopt;
  if (s[13] != ':') return std::nullopt;
  int y, m, d, hh, mm;
  if (!parse_fixed_uint(s, 0, 4, y) || !parse_fixed_uint(s, 5, 2, m) ||
      !parse_fixed_uint(s, 8, 2, d) || !parse_fixed_uint(s, 11, 2, hh) ||
      !parse_fixed_uint(s, 14, 2, mm))
    return std::nullopt;
  if (!valid_civil(y, unsigned(m), unsigned(d)) || hh > 23 || mm > 59) return std::nullopt;
  return days_from_civil(y, unsigned(m), unsigned(d)) * kMinutesPerDay + hh * 60 + mm;
}

std::optional<int> parse_time_of_day(std::string_view s) {
  if (s.size() != 5 || s[2] != ':') return std::nullopt;
  int hh, mm;
  if (!parse_fixed_uint(s, 0, 2, hh) || !parse_fixed_uint(s, 3, 2, mm)) return std::nullopt;
  if (hh > 24 || mm > 59 || (hh == 24 && mm != 0)) return std::nullopt;
  return hh * 60 + mm;
}

std::string format_timestamp(int64_t minutes) {
  const int64_t day = minutes >= 0 ? minutes / kMinutesPerDay
                                   : (minutes - (kMinutesPerDay - 1)) / kMinutesPerDay;
  const int mod = int(minutes - day * kMinutesPerDay);
  int y;
  unsigned m, d;
  civil_from_days(day, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d/%02u/%02u %02d:%02d", y, m, d, mod / 60, mod % 60);
  return buf;
}

std::string format_date(int64_t days) {
  int y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
  return buf;
}

}  // namespace nowcast::timeparse
