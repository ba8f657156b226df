#include "crowdrank/csv.hpp"

#include <charconv>
#include <istream>
#include <ostream>

namespace crowdrank::csv {

std::optional<std::vector<std::string>> Reader::next_row() {
  int c = in_.get();
  if (c == std::istream::traits_type::eof()) return std::nullopt;
  ++line_;
  row_line_ = line_;

  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (;;) {
    if (c == std::istream::traits_type::eof()) break;
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in_.peek() == '"') {
          in_.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line_;
        field.push_back(ch);
      }
    } else if (ch == '"' && field.empty()) {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch != '\r') {
      field.push_back(ch);
    }
    c = in_.get();
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string escape_field(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.put(',');
    out << escape_field(fields[i]);
  }
  out.put('\n');
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace crowdrank::csv
