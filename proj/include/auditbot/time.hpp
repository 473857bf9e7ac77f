#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace auditbot {

// Milliseconds since the Unix epoch, UTC.
using TimeMs = std::int64_t;

struct CivilDate {
    int year = 1970;
    unsigned month = 1;  // 1..12
    unsigned day = 1;    // 1..31

    auto operator<=>(const CivilDate&) const = default;
};

struct IsoWeek {
    int year = 0;       // ISO week-based year
    unsigned week = 0;  // 1..53

    auto operator<=>(const IsoWeek&) const = default;
};

// Days between 1970-01-01 and the given civil date (may be negative).
std::int64_t days_from_civil(const CivilDate& d);
CivilDate civil_from_days(std::int64_t days);

// 0 = Monday .. 6 = Sunday.
int weekday_from_days(std::int64_t days);

IsoWeek iso_week_of(const CivilDate& d);
std::string iso_week_key(const IsoWeek& w);  // "2024-W05"

// Midnight UTC of the Monday starting the ISO week that contains `t`.
TimeMs iso_week_start(TimeMs t);

CivilDate civil_date_of(TimeMs t);

// Strict RFC 3339 UTC: "YYYY-MM-DDTHH:MM:SS[.fff...]Z". Fractions beyond
// milliseconds are truncated.
std::optional<TimeMs> parse_rfc3339(const std::string& text);
std::string format_rfc3339(TimeMs t);

// "YYYY-MM-DD"
std::optional<CivilDate> parse_date(const std::string& text);

constexpr std::int64_t kMsPerDay = 86'400'000;
constexpr std::int64_t kMsPerWeek = 7 * kMsPerDay;
constexpr double kMsPerHour = 3'600'000.0;

}  // namespace auditbot
