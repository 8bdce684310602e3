#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace selboot::csv {

// Numeric table with a header row.
struct Table {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;  // rows x columns

  std::size_t index_of(std::string_view name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c] == name) return c;
    throw Error(ErrorKind::parse, "column '" + std::string(name) + "' not found");
  }
};

inline std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

// Parses one strictly numeric field; empty fields and NA are rejected.
inline double parse_number(std::string_view field, std::size_t row, std::size_t col) {
  const std::string text = unquote(field);
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value))
    throw Error(ErrorKind::parse, "row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                                      ": '" + text + "' is not a number (missing values are not allowed)");
  return value;
}

inline Table parse(std::istream& in) {
  Table table;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, "CSV input is empty");
  for (const auto f : split(line)) table.columns.push_back(unquote(f));
  for (const auto& name : table.columns)
    if (name.empty()) throw Error(ErrorKind::parse, "CSV header has an empty column name");

  std::vector<double> flat;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != table.columns.size())
      throw Error(ErrorKind::parse, "row " + std::to_string(rows + 1) + " has " + std::to_string(fields.size()) +
                                        " fields, header has " + std::to_string(table.columns.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) flat.push_back(parse_number(fields[c], rows + 1, c));
    ++rows;
  }
  const auto cols = static_cast<Eigen::Index>(table.columns.size());
  table.values.resize(static_cast<Eigen::Index>(rows), cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      table.values(static_cast<Eigen::Index>(r), c) = flat[r * table.columns.size() + static_cast<std::size_t>(c)];
  return table;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "' for reading");
  return parse(in);
}

// Header plus raw string fields; used for mixed text/number tables such as
// the interval and rate tables the CLI writes.
struct Records {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

inline Records parse_records(std::istream& in) {
  Records out;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::parse, "CSV input is empty");
  for (const auto f : split(line)) out.columns.push_back(unquote(f));
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> row;
    for (const auto f : split(line)) row.push_back(unquote(f));
    if (row.size() != out.columns.size()) throw Error(ErrorKind::parse, "ragged CSV row");
    out.rows.push_back(std::move(row));
  }
  return out;
}

// Like parse_number but accepts inf and -inf, which mark unbounded endpoints.
inline double parse_extended(std::string_view field) {
  const std::string text = unquote(field);
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  return parse_number(text, 0, 0);
}

// Shortest round-trip representation, so written tables re-parse exactly.
inline std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace selboot::csv
