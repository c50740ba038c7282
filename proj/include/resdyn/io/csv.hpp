#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "resdyn/core/check.hpp"

namespace resdyn::io {

/// Shortest round-trip decimal form of a double. Deterministic across runs
/// (same libc), so re-running a command reproduces files byte for byte.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : out_(path, std::ios::binary), n_cols_(columns.size()) {
    RESDYN_REQUIRE(out_.good(), "csv: cannot open '" << path << "' for writing");
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
  }

  void write_row(const std::vector<double>& row) {
    RESDYN_REQUIRE(row.size() == n_cols_, "csv: row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out_ << ',';
      out_ << format_double(row[i]);
    }
    out_ << '\n';
  }

  /// Pre-formatted cells (labels alongside numbers). Cells must not contain
  /// commas or newlines.
  void write_row_mixed(const std::vector<std::string>& row) {
    RESDYN_REQUIRE(row.size() == n_cols_, "csv: row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out_ << ',';
      RESDYN_REQUIRE(row[i].find(',') == std::string::npos &&
                         row[i].find('\n') == std::string::npos,
                     "csv: cell contains a delimiter");
      out_ << row[i];
    }
    out_ << '\n';
  }

  void close() { out_.close(); }

 private:
  std::ofstream out_;
  std::size_t n_cols_;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    RESDYN_REQUIRE(false, "csv: no column named '" << name << "'");
    return 0;
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  RESDYN_REQUIRE(in.good(), "csv: cannot open '" << path << "' for reading");
  CsvTable table;
  std::string line;
  RESDYN_REQUIRE(static_cast<bool>(std::getline(in, line)), "csv: empty file '" << path << "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) table.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(table.columns.size());
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    RESDYN_REQUIRE(row.size() == table.columns.size(),
                   "csv: malformed row in '" << path << "'");
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace resdyn::io
