#include "cipca/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "cipca/error.hpp"

namespace cipca::csv {

long Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<long>(i);
  }
  return -1;
}

Table read(std::istream& in) {
  Table table;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  bool have_any = false;
  std::size_t line = 1;
  std::size_t row_start = 1;
  bool header_done = false;

  auto finish_row = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_quoted = false;
    // Skip blank lines.
    if (!(row.size() == 1 && row[0].empty())) {
      if (!header_done) {
        table.header = std::move(row);
        header_done = true;
      } else {
        table.rows.push_back(std::move(row));
        table.line_numbers.push_back(row_start);
      }
    }
    row.clear();
    have_any = false;
  };

  char c;
  while (in.get(c)) {
    if (!have_any) {
      row_start = line;
      have_any = true;
    }
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_quoted) {
          throw ParseError(line, "unexpected quote inside unquoted field");
        }
        in_quotes = true;
        field_quoted = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_quoted = false;
        break;
      case '\r':
        if (in.peek() == '\n') in.get(c);
        finish_row();
        ++line;
        break;
      case '\n':
        finish_row();
        ++line;
        break;
      default:
        if (field_quoted) throw ParseError(line, "characters after closing quote");
        field.push_back(c);
    }
  }
  if (in_quotes) throw ParseError(row_start, "unterminated quoted field");
  if (have_any) finish_row();
  return table;
}

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return read(in);
}

std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << quote(row[i]);
  }
  out << "\r\n";
}

std::string format_double(double value) {
  if (std::isnan(value)) return "NaN";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

bool is_missing(std::string_view field) {
  return field.empty() || field == "NA" || field == "NaN" || field == "nan" || field == ".";
}

bool parse_double(std::string_view field, double& out) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
  if (is_missing(field)) {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  if (field == "Inf" || field == "inf") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  if (field == "-Inf" || field == "-inf") {
    out = -std::numeric_limits<double>::infinity();
    return true;
  }
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  auto res = std::from_chars(field.data(), field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

}  // namespace cipca::csv
