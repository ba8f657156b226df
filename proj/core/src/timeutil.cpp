#include "crowdrank/timeutil.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "crowdrank/errors.hpp"

namespace crowdrank {

namespace {

int parse_int(std::string_view s, std::size_t pos, std::size_t len, const char* what) {
  if (pos + len > s.size()) throw DataError(std::string("truncated ") + what + ": '" + std::string(s) + "'");
  int value = 0;
  const char* first = s.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc() || ptr != first + len)
    throw DataError(std::string("bad ") + what + ": '" + std::string(s) + "'");
  return value;
}

}  // namespace

Day day_of(Timestamp t) {
  Timestamp d = t / kSecondsPerDay;
  if (t % kSecondsPerDay < 0) --d;
  return static_cast<Day>(d);
}

Timestamp start_of_day(Day d) { return static_cast<Timestamp>(d) * kSecondsPerDay; }

Timestamp end_of_day(Day d) { return start_of_day(d) + kSecondsPerDay - 1; }

Day parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw DataError("bad date: '" + std::string(text) + "'");
  const int y = parse_int(text, 0, 4, "date");
  const unsigned m = static_cast<unsigned>(parse_int(text, 5, 2, "date"));
  const unsigned d = static_cast<unsigned>(parse_int(text, 8, 2, "date"));
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw DataError("invalid calendar date: '" + std::string(text) + "'");
  return static_cast<Day>(std::chrono::sys_days{ymd}.time_since_epoch().count());
}

Timestamp parse_timestamp(std::string_view text) {
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  if (text.size() == 10) return start_of_day(parse_date(text));
  if (text.size() < 16 || (text[10] != 'T' && text[10] != ' '))
    throw DataError("bad timestamp: '" + std::string(text) + "'");
  const Timestamp base = start_of_day(parse_date(text.substr(0, 10)));
  const int hh = parse_int(text, 11, 2, "timestamp");
  if (text[13] != ':') throw DataError("bad timestamp: '" + std::string(text) + "'");
  const int mm = parse_int(text, 14, 2, "timestamp");
  int ss = 0;
  if (text.size() > 16) {
    if (text[16] != ':' || text.size() != 19) throw DataError("bad timestamp: '" + std::string(text) + "'");
    ss = parse_int(text, 17, 2, "timestamp");
  }
  if (hh > 23 || mm > 59 || ss > 59 || hh < 0 || mm < 0 || ss < 0)
    throw DataError("out-of-range time: '" + std::string(text) + "'");
  return base + hh * 3600 + mm * 60 + ss;
}

std::string format_date(Day d) {
  const std::chrono::sys_days sd{std::chrono::days{d}};
  const std::chrono::year_month_day ymd{sd};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(Timestamp t) {
  const Day d = day_of(t);
  const Timestamp rest = t - start_of_day(d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "T%02d:%02d:%02dZ", static_cast<int>(rest / 3600),
                static_cast<int>((rest / 60) % 60), static_cast<int>(rest % 60));
  return format_date(d) + buf;
}

}  // namespace crowdrank
