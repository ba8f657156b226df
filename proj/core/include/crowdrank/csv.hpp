#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace crowdrank::csv {

// RFC-4180 style CSV. Fields containing commas, quotes or newlines are
// quoted; quotes are doubled. Both LF and CRLF line endings are accepted.

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Next record, or nullopt at end of input. Quoted fields may span lines.
  std::optional<std::vector<std::string>> next_row();

  // 1-based line number where the last returned row started.
  std::size_t row_line() const { return row_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t row_line_ = 0;
};

std::string escape_field(const std::string& field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

std::string format_double(double v);  // shortest round-trip representation

}  // namespace crowdrank::csv
