#include "embkit/csv.hpp"

#include <charconv>
#include <fstream>

#include "embkit/errors.hpp"

namespace embkit {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

bool is_safe_label(const std::string& s) {
  if (s.empty()) return false;
  for (char ch : s) {
    const bool ok = (ch >= 'A' && ch <= 'Z') || (ch >= 'a' && ch <= 'z') ||
                    (ch >= '0' && ch <= '9') || ch == '_' || ch == '-';
    if (!ok) return false;
  }
  return true;
}

namespace {

template <typename T>
T parse_int_field(const std::string& field, const std::string& what,
                  std::size_t line_no) {
  T value{};
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " '" +
                     field + "'");
  }
  return value;
}

}  // namespace

std::uint64_t parse_u64_field(const std::string& field, const std::string& what,
                              std::size_t line_no) {
  return parse_int_field<std::uint64_t>(field, what, line_no);
}

std::int64_t parse_i64_field(const std::string& field, const std::string& what,
                             std::size_t line_no) {
  return parse_int_field<std::int64_t>(field, what, line_no);
}

}  // namespace embkit
