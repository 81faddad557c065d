#include "conc/time_util.hpp"

#include <cstdio>

namespace conc {

namespace {

bool read_digits(std::string_view s, size_t pos, size_t count, int& out) noexcept {
    if (pos + count > s.size()) return false;
    int v = 0;
    for (size_t i = 0; i < count; ++i) {
        const char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

bool valid_ymd(int y, int m, int d) noexcept {
    if (m < 1 || m > 12 || d < 1) return false;
    static constexpr int days_in[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int dim = days_in[m - 1];
    if (m == 2 && (y % 4 == 0 && (y % 100 != 0 || y % 400 == 0))) dim = 29;
    return d <= dim;
}

}  // namespace

std::optional<int64_t> parse_rfc3339_ms(std::string_view s) noexcept {
    // YYYY-MM-DDTHH:MM:SS[.f[f[f]]]Z
    int y, mo, d, h, mi, sec;
    if (!read_digits(s, 0, 4, y)) return std::nullopt;
    if (s.size() < 20 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' ||
        s[16] != ':')
        return std::nullopt;
    if (!read_digits(s, 5, 2, mo) || !read_digits(s, 8, 2, d) || !read_digits(s, 11, 2, h) ||
        !read_digits(s, 14, 2, mi) || !read_digits(s, 17, 2, sec))
        return std::nullopt;
    if (!valid_ymd(y, mo, d) || h > 23 || mi > 59 || sec > 59) return std::nullopt;

    size_t pos = 19;
    int ms = 0;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        size_t nd = 0;
        int frac = 0;
        while (pos < s.size() && nd < 3 && s[pos] >= '0' && s[pos] <= '9') {
            frac = frac * 10 + (s[pos] - '0');
            ++pos;
            ++nd;
        }
        if (nd == 0) return std::nullopt;
        for (size_t i = nd; i < 3; ++i) frac *= 10;
        ms = frac;
    }
    if (pos + 1 != s.size() || s[pos] != 'Z') return std::nullopt;

    const int64_t days = days_from_civil(y, mo, d);
    return days * kMsPerDay + h * kMsPerHour + mi * kMsPerMinute + sec * kMsPerSecond + ms;
}

std::optional<int64_t> parse_date(std::string_view s) noexcept {
    int y, mo, d;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    if (!read_digits(s, 0, 4, y) || !read_digits(s, 5, 2, mo) || !read_digits(s, 8, 2, d))
        return std::nullopt;
    if (!valid_ymd(y, mo, d)) return std::nullopt;
    return days_from_civil(y, mo, d);
}

std::string format_rfc3339_ms(int64_t ts_ms) {
    const int64_t day = utc_day_index(ts_ms);
    const int64_t intraday = ts_ms - day * kMsPerDay;
    const CivilDate cd = civil_from_days(day);
    const int h = static_cast<int>(intraday / kMsPerHour);
    const int mi = static_cast<int>((intraday / kMsPerMinute) % 60);
    const int sec = static_cast<int>((intraday / kMsPerSecond) % 60);
    const int ms = static_cast<int>(intraday % kMsPerSecond);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", cd.year, cd.month,
                  cd.day, h, mi, sec, ms);
    return buf;
}

std::string format_date(int64_t day_index) {
    const CivilDate cd = civil_from_days(day_index);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", cd.year, cd.month, cd.day);
    return buf;
}

}  // namespace conc
