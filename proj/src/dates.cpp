#include "hebr/dates.hpp"

#include <charconv>
#include <cstdio>

#include "hebr/errors.hpp"

namespace hebr {

std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);             // [0, 399]
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;   // [0, 365]
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;            // [0, 146096]
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return CivilDate{static_cast<int>(y + (m <= 2)), m, d};
}

std::int64_t parse_iso_date(const std::string& text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw data_error("malformed date '" + text + "' (expected YYYY-MM-DD)");
  }
  int y = 0;
  unsigned m = 0, d = 0;
  auto parse_field = [&](const char* first, const char* last, auto& out) {
    auto [p, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || p != last) {
      throw data_error("malformed date '" + text + "' (expected YYYY-MM-DD)");
    }
  };
  parse_field(text.data(), text.data() + 4, y);
  parse_field(text.data() + 5, text.data() + 7, m);
  parse_field(text.data() + 8, text.data() + 10, d);
  if (m < 1 || m > 12 || d < 1 || d > 31) {
    throw data_error("date '" + text + "' out of range");
  }
  return days_from_civil(y, m, d);
}

std::string format_iso_date(std::int64_t days) {
  const CivilDate c = civil_from_days(days);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", c.year, c.month, c.day);
  return buf;
}

int day_of_year(std::int64_t days) {
  const CivilDate c = civil_from_days(days);
  return static_cast<int>(days - days_from_civil(c.year, 1, 1)) + 1;
}

}  // namespace hebr
