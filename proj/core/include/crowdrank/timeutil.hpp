#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace crowdrank {

// All civil time is UTC; the day boundary is UTC midnight.
// Day counts days since the Unix epoch, Timestamp counts seconds.
using Day = std::int32_t;
using Timestamp = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;

Day day_of(Timestamp t);
Timestamp start_of_day(Day d);
// Last whole second of the day; "end of day" queries compare <= this.
Timestamp end_of_day(Day d);

// "YYYY-MM-DD"
Day parse_date(std::string_view text);
// "YYYY-MM-DD", optionally followed by "[T ]HH:MM[:SS]" and a trailing "Z".
Timestamp parse_timestamp(std::string_view text);

std::string format_date(Day d);
std::string format_timestamp(Timestamp t);  // YYYY-MM-DDTHH:MM:SSZ

}  // namespace crowdrank
