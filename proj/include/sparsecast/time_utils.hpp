// Calendar and clock helpers.
//
// All timestamps are integer seconds since the Unix epoch. Local time is a
// fixed per-participant UTC offset; there is no timezone database or DST.
#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

#include "sparsecast/common.hpp"

namespace sparsecast {

constexpr std::int64_t kSecondsPerDay = 86400;
constexpr std::int64_t kSecondsPerHour = 3600;

// Floor division so negative timestamps (pre-1970) behave.
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

inline std::int64_t day_of_ts(std::int64_t ts) { return floor_div(ts, kSecondsPerDay); }

// Hour of day, 0..23.
inline int hour_of_ts(std::int64_t ts) {
    return static_cast<int>(floor_div(ts, kSecondsPerHour) - 24 * day_of_ts(ts));
}

// Day of week, 0 = Monday .. 6 = Sunday. 1970-01-01 was a Thursday.
inline int weekday_of_day(std::int64_t day) {
    std::int64_t w = (day + 3) % 7;
    return static_cast<int>(w < 0 ? w + 7 : w);
}

inline int weekday_of_ts(std::int64_t ts) { return weekday_of_day(day_of_ts(ts)); }

// Civil date conversion (Hinnant's algorithm).
struct CivilDate {
    int year;
    int month;  // 1..12
    int day;    // 1..31
};

inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u + static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline CivilDate civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

// "YYYY-MM-DD" for a days-since-epoch value.
inline std::string format_date(std::int64_t day) {
    CivilDate c = civil_from_days(day);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", c.year, c.month, c.day);
    return buf;
}

// Parses "YYYY-MM-DD" to days since epoch. Throws DataError on bad input.
inline std::int64_t parse_date(const std::string& s) {
    int y = 0, m = 0, d = 0;
    if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2d-%2d", &y, &m, &d) != 3 || s[4] != '-' || s[7] != '-')
        throw DataError("malformed date '" + s + "' (expected YYYY-MM-DD)");
    if (m < 1 || m > 12 || d < 1 || d > 31) throw DataError("date out of range '" + s + "'");
    return days_from_civil(y, m, d);
}

}  // namespace sparsecast
