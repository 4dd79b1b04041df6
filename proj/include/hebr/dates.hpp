#pragma once

#include <cstdint>
#include <string>

namespace hebr {

/// Days since 1970-01-01 (can be negative). Proleptic Gregorian calendar.
std::int64_t days_from_civil(int year, unsigned month, unsigned day);

struct CivilDate {
  int year;
  unsigned month;
  unsigned day;
};

CivilDate civil_from_days(std::int64_t days);

/// Parses "YYYY-MM-DD"; throws data_error on malformed input.
std::int64_t parse_iso_date(const std::string& text);

std::string format_iso_date(std::int64_t days);

/// 1-based day of year (1..366).
int day_of_year(std::int64_t days);

}  // namespace hebr
