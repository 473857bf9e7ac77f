#include "auditbot/time.hpp"

#include <cctype>
#include <cstdio>

namespace auditbot {

namespace {

bool is_digits(const std::string& s, size_t pos, size_t n) {
    if (pos + n > s.size()) return false;
    for (size_t i = pos; i < pos + n; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

int to_int(const std::string& s, size_t pos, size_t n) {
    int v = 0;
    for (size_t i = pos; i < pos + n; ++i) v = v * 10 + (s[i] - '0');
    return v;
}

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(int y, unsigned m) {
    static const unsigned k[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && leap(y)) return 29;
    return k[m - 1];
}

}  // namespace

std::int64_t days_from_civil(const CivilDate& d) {
    // Howard Hinnant's civil-days algorithm.
    std::int64_t y = d.year;
    const unsigned m = d.month;
    const unsigned day = d.day;
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
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
    const unsigned day = doy - (153 * mp + 2) / 5 + 1;
    const unsigned month = mp + (mp < 10 ? 3 : -9);
    return CivilDate{static_cast<int>(y + (month <= 2)), month, day};
}

int weekday_from_days(std::int64_t days) {
    // 1970-01-01 was a Thursday (weekday 3 with Monday = 0).
    return static_cast<int>(((days % 7) + 7 + 3) % 7);
}

IsoWeek iso_week_of(const CivilDate& d) {
    const std::int64_t days = days_from_civil(d);
    // Thursday of this date's week decides the ISO week-year.
    const std::int64_t thursday = days - weekday_from_days(days) + 3;
    const CivilDate th = civil_from_days(thursday);
    const std::int64_t jan1 = days_from_civil(CivilDate{th.year, 1, 1});
    const unsigned week = static_cast<unsigned>((thursday - jan1) / 7) + 1;
    return IsoWeek{th.year, week};
}

std::string iso_week_key(const IsoWeek& w) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-W%02u", w.year, w.week);
    return buf;
}

TimeMs iso_week_start(TimeMs t) {
    std::int64_t days = t / kMsPerDay;
    if (t < 0 && t % kMsPerDay != 0) --days;
    days -= weekday_from_days(days);
    return days * kMsPerDay;
}

CivilDate civil_date_of(TimeMs t) {
    std::int64_t days = t / kMsPerDay;
    if (t < 0 && t % kMsPerDay != 0) --days;
    return civil_from_days(days);
}

std::optional<TimeMs> parse_rfc3339(const std::string& s) {
    // YYYY-MM-DDTHH:MM:SS[.frac]Z
    if (s.size() < 20) return std::nullopt;
    if (!is_digits(s, 0, 4) || s[4] != '-' || !is_digits(s, 5, 2) || s[7] != '-' ||
        !is_digits(s, 8, 2) || (s[10] != 'T' && s[10] != 't') || !is_digits(s, 11, 2) ||
        s[13] != ':' || !is_digits(s, 14, 2) || s[16] != ':' || !is_digits(s, 17, 2)) {
        return std::nullopt;
    }
    const int year = to_int(s, 0, 4);
    const unsigned month = static_cast<unsigned>(to_int(s, 5, 2));
    const unsigned day = static_cast<unsigned>(to_int(s, 8, 2));
    const int hour = to_int(s, 11, 2);
    const int min = to_int(s, 14, 2);
    const int sec = to_int(s, 17, 2);
    if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month)) return std::nullopt;
    if (hour > 23 || min > 59 || sec > 59) return std::nullopt;

    size_t pos = 19;
    std::int64_t millis = 0;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        const size_t frac_start = pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos == frac_start) return std::nullopt;
        int scale = 100;
        for (size_t i = frac_start; i < pos && i < frac_start + 3; ++i) {
            millis += (s[i] - '0') * scale;
            scale /= 10;
        }
    }
    if (pos + 1 != s.size() || (s[pos] != 'Z' && s[pos] != 'z')) return std::nullopt;

    const std::int64_t days = days_from_civil(CivilDate{year, month, day});
    return ((days * 24 + hour) * 60 + min) * 60'000 + sec * 1000 + millis;
}

std::string format_rfc3339(TimeMs t) {
    std::int64_t days = t / kMsPerDay;
    std::int64_t rem = t % kMsPerDay;
    if (rem < 0) {
        rem += kMsPerDay;
        --days;
    }
    const CivilDate d = civil_from_days(days);
    const int ms = static_cast<int>(rem % 1000);
    const int sec = static_cast<int>(rem / 1000 % 60);
    const int min = static_cast<int>(rem / 60'000 % 60);
    const int hour = static_cast<int>(rem / 3'600'000);
    char buf[40];
    if (ms != 0) {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", d.year, d.month,
                      d.day, hour, min, sec, ms);
    } else {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", d.year, d.month, d.day,
                      hour, min, sec);
    }
    return buf;
}

std::optional<CivilDate> parse_date(const std::string& s) {
    if (s.size() != 10 || !is_digits(s, 0, 4) || s[4] != '-' || !is_digits(s, 5, 2) ||
        s[7] != '-' || !is_digits(s, 8, 2)) {
        return std::nullopt;
    }
    const int year = to_int(s, 0, 4);
    const unsigned month = static_cast<unsigned>(to_int(s, 5, 2));
    const unsigned day = static_cast<unsigned>(to_int(s, 8, 2));
    if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month)) return std::nullopt;
    return CivilDate{year, month, day};
}

}  // namespace auditbot
