#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace m6 {

// Calendar date, day resolution. Trading calendars are ordered lists of
// these; no day arithmetic is needed beyond ordering.
struct Date {
    std::int16_t year = 0;
    std::int8_t month = 0;
    std::int8_t day = 0;

    auto operator<=>(const Date&) const = default;

    bool valid() const;
    std::string iso() const;

    // Parses "YYYY-MM-DD"; throws ParseError on malformed input.
    static Date parse(const std::string& s);
};

}  // namespace m6
