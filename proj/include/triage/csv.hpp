#pragma once

// CSV output with fixed 9-significant-digit floats, and labelled matrix
// import/export for the solver.

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "triage/matrix_game.hpp"

namespace triage::csv {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string number(double x) {
  if (x == 0.0) x = 0.0;  // drop the sign of negative zero
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

inline std::string number(long long x) { return std::to_string(x); }
inline std::string number(int x) { return std::to_string(x); }
inline std::string number(std::size_t x) { return std::to_string(x); }

inline std::string quote(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << quote(cells[i]);
  }
  os << '\n';
}

/// Splits one line, honouring double-quoted cells.
inline std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else if (c != '\r') {
      cells.back() += c;
    }
  }
  if (quoted) throw CsvError("unterminated quote in: " + line);
  return cells;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool parse_number(const std::string& raw, double& out) {
  const std::string s = trim(raw);
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

/// Reads a utility matrix. The first row holds column labels after a
/// corner cell and each later row starts with its row label. A file whose
/// first row is entirely numeric is read as an unlabelled matrix.
inline UtilityMatrix read_matrix(std::istream& is) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split_row(line));
  }
  if (rows.empty()) throw CsvError("matrix file is empty");

  bool labelled = false;
  for (const auto& cell : rows.front()) {
    double x;
    if (!parse_number(cell, x)) labelled = true;
  }
  UtilityMatrix m;
  const std::size_t first_data_row = labelled ? 1 : 0;
  const std::size_t first_data_col = labelled ? 1 : 0;
  const std::size_t ncols = rows.front().size() - first_data_col;
  const std::size_t nrows = rows.size() - first_data_row;
  if (ncols == 0 || nrows == 0) throw CsvError("matrix has no entries");
  m.values.resize(static_cast<Eigen::Index>(nrows), static_cast<Eigen::Index>(ncols));
  for (std::size_t j = 0; j < ncols; ++j)
    m.col_labels.push_back(labelled ? trim(rows.front()[j + 1]) : "col" + std::to_string(j + 1));
  for (std::size_t i = 0; i < nrows; ++i) {
    const auto& r = rows[i + first_data_row];
    if (r.size() != ncols + first_data_col)
      throw CsvError("row " + std::to_string(i + 1) + " has " + std::to_string(r.size()) +
                     " cells, expected " + std::to_string(ncols + first_data_col));
    m.row_labels.push_back(labelled ? trim(r[0]) : "row" + std::to_string(i + 1));
    for (std::size_t j = 0; j < ncols; ++j) {
      double x;
      if (!parse_number(r[j + first_data_col], x))
        throw CsvError("row " + std::to_string(i + 1) + ", column " + std::to_string(j + 1) +
                       ": '" + r[j + first_data_col] + "' is not a number");
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x;
    }
  }
  return m;
}

inline UtilityMatrix parse_matrix(const std::string& text) {
  std::istringstream is(text);
  return read_matrix(is);
}

inline void write_matrix(std::ostream& os, const UtilityMatrix& m) {
  std::vector<std::string> header{"defender\\attacker"};
  header.insert(header.end(), m.col_labels.begin(), m.col_labels.end());
  write_row(os, header);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<std::string> row{m.row_labels[static_cast<std::size_t>(i)]};
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m.values(i, j)));
    write_row(os, row);
  }
}

}  // namespace triage::csv
