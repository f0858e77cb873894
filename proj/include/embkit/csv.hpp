#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace embkit {

// Minimal CSV support for embkit's fixed schemas. All file formats here are
// comma separated, UTF-8, LF line endings, and never need quoting: fields
// are integers, decimals, or tokens restricted to [A-Za-z0-9_./:-].

// Splits one line on commas. No quote handling by design.
std::vector<std::string> split_csv_line(const std::string& line);

// Reads a whole file into lines, dropping a trailing empty line. CR at end
// of line is stripped so CRLF inputs still parse.
std::vector<std::string> read_lines(const std::filesystem::path& path);

// True iff s is non-empty and every char is in [A-Za-z0-9_-].
bool is_safe_label(const std::string& s);

// Parses an unsigned integer field; throws ParseError naming the file line.
std::uint64_t parse_u64_field(const std::string& field, const std::string& what,
                              std::size_t line_no);
std::int64_t parse_i64_field(const std::string& field, const std::string& what,
                             std::size_t line_no);

}  // namespace embkit
