#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hydrossm {

/// Calendar day stored as a count of days since 1970-01-01 (proleptic
/// Gregorian). Cheap to compare and step, exact across leap years.
struct Date {
    std::int32_t days = 0;

    static Date from_ymd(int year, int month, int day) {
        if (month < 1 || month > 12 || day < 1 || day > 31)
            throw std::invalid_argument("Date: invalid civil date " + std::to_string(year) + "-" +
                                        std::to_string(month) + "-" + std::to_string(day));
        // days-from-civil, Howard Hinnant's algorithm
        const int y = year - (month <= 2);
        const int era = (y >= 0 ? y : y - 399) / 400;
        const unsigned yoe = static_cast<unsigned>(y - era * 400);
        const unsigned doy = (153u * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return Date{static_cast<std::int32_t>(era * 146097 + static_cast<int>(doe) - 719468)};
    }

    struct Ymd {
        int year, month, day;
    };

    Ymd to_ymd() const {
        std::int64_t z = days + 719468;
        const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
        const unsigned doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        const unsigned d = doy - (153 * mp + 2) / 5 + 1;
        const unsigned m = mp + (mp < 10 ? 3 : -9);
        return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
    }

    /// Parses strict ISO-8601 "YYYY-MM-DD".
    static Date parse(const std::string& s) {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-')
            throw std::invalid_argument("Date: expected YYYY-MM-DD, got '" + s + "'");
        for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
            if (s[i] < '0' || s[i] > '9')
                throw std::invalid_argument("Date: expected YYYY-MM-DD, got '" + s + "'");
        const int y = std::stoi(s.substr(0, 4));
        const int m = std::stoi(s.substr(5, 2));
        const int d = std::stoi(s.substr(8, 2));
        Date date = from_ymd(y, m, d);
        if (date.to_string() != s)
            throw std::invalid_argument("Date: '" + s + "' is not a valid calendar day");
        return date;
    }

    std::string to_string() const {
        const Ymd c = to_ymd();
        char buf[11];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", c.year, c.month, c.day);
        return buf;
    }

    Date operator+(int n) const { return Date{days + n}; }
    Date operator-(int n) const { return Date{days - n}; }
    int operator-(Date other) const { return days - other.days; }
    auto operator<=>(const Date&) const = default;
};

/// Closed date interval [start, end].
struct DatePeriod {
    Date start, end;

    bool contains(Date d) const { return start <= d && d <= end; }
    int length_days() const { return end - start + 1; }
};

}  // namespace hydrossm
