#pragma once

#include "mixforge/error.hpp"

#include <charconv>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace mixforge {

/// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int64_t days_since_epoch) : days_(days_since_epoch) {}

    static constexpr Date from_ymd(int year, unsigned month, unsigned day) {
        // days_from_civil (H. Hinnant)
        const int y = year - (month <= 2 ? 1 : 0);
        const int era = (y >= 0 ? y : y - 399) / 400;
        const unsigned yoe = static_cast<unsigned>(y - era * 400);
        const unsigned doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return Date(static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468);
    }

    /// Parses YYYY-MM-DD. Throws parse error on anything else.
    static Date parse(std::string_view text) {
        auto bad = [&]() -> Date { fail(ErrorKind::parse, "invalid ISO-8601 date '" + std::string(text) + "'"); };
        if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
            return bad();
        }
        int y = 0;
        unsigned m = 0;
        unsigned d = 0;
        auto num = [&](std::string_view s, auto& out) {
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
            return ec == std::errc{} && ptr == s.data() + s.size();
        };
        if (!num(text.substr(0, 4), y) || !num(text.substr(5, 2), m) || !num(text.substr(8, 2), d)) {
            return bad();
        }
        if (m < 1 || m > 12 || d < 1 || d > days_in_month(y, m)) {
            return bad();
        }
        return from_ymd(y, m, d);
    }

    constexpr std::int64_t days() const noexcept { return days_; }

    std::string iso() const {
        // civil_from_days
        const std::int64_t z = days_ + 719468;
        const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
        const auto doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const std::int64_t y0 = static_cast<std::int64_t>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        const unsigned d = doy - (153 * mp + 2) / 5 + 1;
        const unsigned m = mp < 10 ? mp + 3 : mp - 9;
        const std::int64_t y = y0 + (m <= 2 ? 1 : 0);
        char buf[48];
        std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(y), m, d);
        return buf;
    }

    constexpr Date operator+(std::int64_t n) const { return Date(days_ + n); }
    constexpr std::int64_t operator-(Date other) const { return days_ - other.days_; }
    constexpr auto operator<=>(const Date&) const = default;

private:
    static constexpr unsigned days_in_month(int y, unsigned m) {
        constexpr unsigned table[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        return m == 2 && leap ? 29 : table[m - 1];
    }

    std::int64_t days_ = 0;
};

} // namespace mixforge
