#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cipca::csv {

using Row = std::vector<std::string>;

struct Table {
  Row header;
  std::vector<Row> rows;
  // 1-based physical line of each data row, for error messages.
  std::vector<std::size_t> line_numbers;

  // Index of a header column, or -1.
  long column(std::string_view name) const;
};

// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line endings.
Table read(std::istream& in);
Table read_file(const std::string& path);

// Quotes a field only when it contains a comma, quote, CR or LF.
std::string quote(std::string_view field);
void write_row(std::ostream& out, const Row& row);

// Shortest round-trip decimal representation; identical bytes for identical doubles.
std::string format_double(double value);

// Parses a full field as a double. Empty, "NA", "NaN", "nan" and "." are missing.
// Returns false when the field is not a number.
bool parse_double(std::string_view field, double& out);
bool is_missing(std::string_view field);

}  // namespace cipca::csv
