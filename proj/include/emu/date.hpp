/**
 * @file date.hpp
 * @brief Calendar helpers over std::chrono civil dates
 */
#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace emu {

using Date = std::chrono::year_month_day;

/// Parses YYYY-MM-DD. Throws Error(ParseError) on anything else.
Date parse_date(std::string_view text);
std::string format_date(const Date& d);

inline Date make_date(int y, unsigned m, unsigned d) {
    return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

inline std::int64_t day_number(const Date& d) {
    return std::chrono::sys_days{d}.time_since_epoch().count();
}

inline Date add_days(const Date& d, std::int64_t n) {
    return Date{std::chrono::sys_days{d} + std::chrono::days{n}};
}

/// Signed number of days from `a` to `b`.
inline std::int64_t days_between(const Date& a, const Date& b) {
    return day_number(b) - day_number(a);
}

/// 1-based ordinal day within the calendar year (1..366).
int day_of_year(const Date& d);

inline int year_of(const Date& d) { return static_cast<int>(d.year()); }
inline int month_of(const Date& d) { return static_cast<int>(static_cast<unsigned>(d.month())); }

/// Inclusive calendar interval.
struct DateRange {
    Date first;
    Date last;

    bool contains(const Date& d) const { return first <= d && d <= last; }
    std::int64_t length() const { return days_between(first, last) + 1; }
};

} // namespace emu
