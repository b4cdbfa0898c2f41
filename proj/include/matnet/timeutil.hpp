#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace matnet {

// Proleptic Gregorian calendar date. All timestamps in the project are
// timezone-naive seconds since 1970-01-01 00:00:00.
struct CivilDate {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const CivilDate&) const = default;
};

std::int64_t days_from_civil(int year, int month, int day);
CivilDate civil_from_days(std::int64_t days);

std::int64_t make_timestamp(const CivilDate& date, int hour = 0, int minute = 0, int second = 0);

// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM", "YYYY-MM-DDTHH:MM" and the same
// with ":SS". Throws ParseError on anything else.
std::int64_t parse_iso8601(std::string_view text);

// "YYYY-MM-DD" only.
CivilDate parse_date(std::string_view text);

std::string format_iso8601(std::int64_t timestamp);
std::string format_date(const CivilDate& date);
std::string format_date(std::int64_t timestamp);

CivilDate date_of(std::int64_t timestamp);
int day_of_year(const CivilDate& date);  // 1-based

}  // namespace matnet
