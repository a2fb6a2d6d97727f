#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "epistat/core/error.hpp"

namespace epistat::io {

/// Nine significant digits, the precision of every number the toolkit writes.
inline std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

inline std::string format_number(long x) { return std::to_string(x); }
inline std::string format_number(int x) { return std::to_string(x); }
inline std::string format_number(std::size_t x) { return std::to_string(x); }

struct CsvRow {
  std::size_t line = 0;  // 1-based line in the file
  std::vector<std::string> fields;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    out.emplace_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Plain comma-separated text: no quoting, blank lines skipped.
inline CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw DataError("expected " + std::to_string(t.header.size()) + " fields, found " +
                          std::to_string(fields.size()),
                      lineno);
    t.rows.push_back({lineno, std::move(fields)});
  }
  if (!have_header) throw DataError("empty file: missing header", 1);
  return t;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in);
}

inline std::string join_header(const std::vector<std::string>& h) {
  std::string s;
  for (std::size_t k = 0; k < h.size(); ++k) s += (k ? "," : "") + h[k];
  return s;
}

/// Throws unless the header is exactly `expected`.
inline void expect_header(const CsvTable& t, const std::vector<std::string>& expected) {
  if (t.header != expected)
    throw DataError("header '" + join_header(t.header) + "' does not match schema '" +
                        join_header(expected) + "'",
                    1);
}

inline double parse_double(const CsvRow& row, std::size_t col) {
  const std::string& f = row.fields[col];
  double v = 0.0;
  const char* first = f.data();
  if (!f.empty() && f.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, f.data() + f.size(), v);
  if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
    throw DataError("non-numeric cell '" + f + "'", row.line, col + 1);
  return v;
}

inline long parse_long(const CsvRow& row, std::size_t col) {
  const std::string& f = row.fields[col];
  long v = 0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
    throw DataError("expected an integer, found '" + f + "'", row.line, col + 1);
  return v;
}

inline long parse_count(const CsvRow& row, std::size_t col) {
  const long v = parse_long(row, col);
  if (v < 0) throw DataError("negative count " + std::to_string(v), row.line, col + 1);
  return v;
}

/// Writes via a temporary file in the same directory, then renames it into
/// place, so readers never see a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot rename into '" + path.string() + "': " + ec.message());
  }
}

}  // namespace epistat::io
