#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace conc {

// Proleptic Gregorian day arithmetic (Howard Hinnant's algorithms).
// Day 0 = 1970-01-01. All timestamps are UTC milliseconds since epoch.

constexpr int64_t kMsPerSecond = 1000;
constexpr int64_t kMsPerMinute = 60 * kMsPerSecond;
constexpr int64_t kMsPerHour = 60 * kMsPerMinute;
constexpr int64_t kMsPerDay = 24 * kMsPerHour;

constexpr int64_t days_from_civil(int y, int m, int d) noexcept {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

struct CivilDate {
    int year;
    int month;
    int day;
};

constexpr CivilDate civil_from_days(int64_t z) noexcept {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t y = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

/// Day index (days since epoch) containing a UTC millisecond timestamp.
constexpr int64_t utc_day_index(int64_t ts_ms) noexcept {
    // Floor division; tapes predate 1970 never occur but keep it correct.
    return ts_ms >= 0 ? ts_ms / kMsPerDay : (ts_ms - kMsPerDay + 1) / kMsPerDay;
}

/// Strict RFC 3339 UTC parse: YYYY-MM-DDTHH:MM:SS[.fff]Z.
/// Fractional seconds are optional, at most 3 digits. Returns nullopt on
/// any malformation.
std::optional<int64_t> parse_rfc3339_ms(std::string_view s) noexcept;

/// Parse a bare calendar date YYYY-MM-DD to epoch-day index.
std::optional<int64_t> parse_date(std::string_view s) noexcept;

/// Canonical forms used in every file this project writes.
std::string format_rfc3339_ms(int64_t ts_ms);
std::string format_date(int64_t day_index);

/// Month key (year * 12 + month - 1) for month-boundary masking.
constexpr int month_key(int64_t day_index) noexcept {
    const CivilDate cd = civil_from_days(day_index);
    return cd.year * 12 + cd.month - 1;
}

}  // namespace conc
