#include <doctest.h>

#include <sstream>

#include "crowdrank/csv.hpp"
#include "crowdrank/errors.hpp"
#include "crowdrank/rng.hpp"
#include "crowdrank/timeutil.hpp"

using namespace crowdrank;

TEST_CASE("date parse and format round trip") {
  CHECK(parse_date("1970-01-01") == 0);
  CHECK(parse_date("1970-01-02") == 1);
  CHECK(parse_date("1969-12-31") == -1);
  CHECK(format_date(parse_date("2023-06-15")) == "2023-06-15");
  CHECK(format_date(parse_date("2000-02-29")) == "2000-02-29");
  CHECK_THROWS_AS(parse_date("2023-13-01"), DataError);
  CHECK_THROWS_AS(parse_date("2023-02-30"), DataError);
  CHECK_THROWS_AS(parse_date("20230615"), DataError);
}

TEST_CASE("timestamp parse variants") {
  const Timestamp t = parse_timestamp("2023-06-15T12:30:45Z");
  CHECK(t == parse_timestamp("2023-06-15 12:30:45"));
  CHECK(format_timestamp(t) == "2023-06-15T12:30:45Z");
  CHECK(parse_timestamp("2023-06-15") == start_of_day(parse_date("2023-06-15")));
  CHECK(parse_timestamp("2023-06-15T12:30") == t - 45);
  CHECK_THROWS_AS(parse_timestamp("2023-06-15T25:00:00"), DataError);
  CHECK_THROWS_AS(parse_timestamp("junk"), DataError);
}

TEST_CASE("day boundaries are UTC midnight") {
  const Day d = parse_date("2023-06-15");
  CHECK(day_of(start_of_day(d)) == d);
  CHECK(day_of(end_of_day(d)) == d);
  CHECK(day_of(end_of_day(d) + 1) == d + 1);
  CHECK(end_of_day(d) - start_of_day(d) == kSecondsPerDay - 1);
  CHECK(day_of(-1) == -1);  // floor, not truncation
}

TEST_CASE("csv quoting round trip") {
  std::ostringstream out;
  csv::write_row(out, {"plain", "with,comma", "with \"quotes\"", "multi\nline", ""});
  csv::write_row(out, {"second", "row", "x", "y", "z"});

  std::istringstream in(out.str());
  csv::Reader reader(in);
  const auto row1 = reader.next_row();
  REQUIRE(row1.has_value());
  CHECK(*row1 == std::vector<std::string>{"plain", "with,comma", "with \"quotes\"", "multi\nline", ""});
  const auto row2 = reader.next_row();
  REQUIRE(row2.has_value());
  CHECK(reader.row_line() == 3);  // the quoted newline consumed line 2
  CHECK_FALSE(reader.next_row().has_value());
}

TEST_CASE("csv reader handles crlf and tracks lines") {
  std::istringstream in("a,b\r\nc,d\r\n");
  csv::Reader reader(in);
  CHECK(*reader.next_row() == std::vector<std::string>{"a", "b"});
  CHECK(reader.row_line() == 1);
  CHECK(*reader.next_row() == std::vector<std::string>{"c", "d"});
  CHECK(reader.row_line() == 2);
}

TEST_CASE("format_double round trips doubles exactly") {
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const double v = (rng.uniform01() - 0.5) * std::pow(10.0, static_cast<double>(i % 20) - 10);
    CHECK(std::stod(csv::format_double(v)) == v);
  }
  CHECK(csv::format_double(0.5) == "0.5");
}
