#include "matnet/timeutil.hpp"

#include <array>
#include <charconv>
#include <cstdio>

#include "matnet/common.hpp"

namespace matnet {

namespace {

bool is_leap(int y) { return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0); }

int days_in_month(int y, int m) {
    static constexpr std::array<int, 12> lengths = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap(y)) return 29;
    return lengths[static_cast<std::size_t>(m - 1)];
}

int parse_int_field(std::string_view text, std::size_t pos, std::size_t len,
                    std::string_view what) {
    if (pos + len > text.size()) {
        throw ParseError("timestamp '" + std::string(text) + "': truncated " + std::string(what));
    }
    int value = 0;
    const char* first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc() || ptr != first + len) {
        throw ParseError("timestamp '" + std::string(text) + "': bad " + std::string(what));
    }
    return value;
}

void expect_char(std::string_view text, std::size_t pos, char a, char b = '\0') {
    if (pos >= text.size() || (text[pos] != a && (b == '\0' || text[pos] != b))) {
        throw ParseError("timestamp '" + std::string(text) + "': malformed");
    }
}

}  // namespace

std::int64_t days_from_civil(int year, int month, int day) {
    // Howard Hinnant's algorithm, via shifting the epoch to March 1.
    const int y = year - (month <= 2 ? 1 : 0);
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy =
        static_cast<unsigned>((153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t days) {
    const std::int64_t z = days + 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : static_cast<unsigned>(-9));
    return CivilDate{static_cast<int>(y + (m <= 2 ? 1 : 0)), static_cast<int>(m),
                     static_cast<int>(d)};
}

std::int64_t make_timestamp(const CivilDate& date, int hour, int minute, int second) {
    return days_from_civil(date.year, date.month, date.day) * 86400 + hour * 3600 + minute * 60 +
           second;
}

CivilDate parse_date(std::string_view text) {
    if (text.size() != 10) throw ParseError("date '" + std::string(text) + "': expected YYYY-MM-DD");
    const int year = parse_int_field(text, 0, 4, "year");
    expect_char(text, 4, '-');
    const int month = parse_int_field(text, 5, 2, "month");
    expect_char(text, 7, '-');
    const int day = parse_int_field(text, 8, 2, "day");
    if (month < 1 || month > 12) {
        throw ParseError("date '" + std::string(text) + "': month out of range");
    }
    if (day < 1 || day > days_in_month(year, month)) {
        throw ParseError("date '" + std::string(text) + "': day out of range");
    }
    return CivilDate{year, month, day};
}

std::int64_t parse_iso8601(std::string_view text) {
    if (text.size() < 10) throw ParseError("timestamp '" + std::string(text) + "': too short");
    CivilDate date = parse_date(text.substr(0, 10));
    int hour = 0, minute = 0, second = 0;
    if (text.size() > 10) {
        expect_char(text, 10, 'T', ' ');
        if (text.size() != 16 && text.size() != 19) {
            throw ParseError("timestamp '" + std::string(text) + "': malformed time part");
        }
        hour = parse_int_field(text, 11, 2, "hour");
        expect_char(text, 13, ':');
        minute = parse_int_field(text, 14, 2, "minute");
        if (text.size() == 19) {
            expect_char(text, 16, ':');
            second = parse_int_field(text, 17, 2, "second");
        }
        if (hour < 0 || hour > 23 || minute < 0 || minute > 59 || second < 0 || second > 59) {
            throw ParseError("timestamp '" + std::string(text) + "': time out of range");
        }
    }
    return make_timestamp(date, hour, minute, second);
}

std::string format_date(const CivilDate& date) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", date.year, date.month, date.day);
    return buf;
}

std::string format_date(std::int64_t timestamp) { return format_date(date_of(timestamp)); }

std::string format_iso8601(std::int64_t timestamp) {
    std::int64_t days = timestamp / 86400;
    std::int64_t rem = timestamp % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    const CivilDate date = civil_from_days(days);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", date.year, date.month,
                  date.day, static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                  static_cast<int>(rem % 60));
    return buf;
}

CivilDate date_of(std::int64_t timestamp) {
    std::int64_t days = timestamp / 86400;
    if (timestamp % 86400 < 0) --days;
    return civil_from_days(days);
}

int day_of_year(const CivilDate& date) {
    return static_cast<int>(days_from_civil(date.year, date.month, date.day) -
                            days_from_civil(date.year, 1, 1)) +
           1;
}

}  // namespace matnet
