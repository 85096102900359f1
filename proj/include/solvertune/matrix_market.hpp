#pragma once

#include <algorithm>
#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "solvertune/csr_matrix.hpp"
#include "solvertune/errors.hpp"

namespace solvertune {
namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

/// Full-precision formatting; %.17g round-trips doubles exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Parses a coordinate-format Matrix Market file (real/integer field,
/// general/symmetric symmetry). Symmetric storage is expanded to full,
/// duplicates are summed, rows come out sorted. Diagnostics carry the
/// 1-based line number.
inline CsrMatrix parse_matrix_market(std::istream& in, const std::string& name) {
  auto fail = [&](std::size_t line, const std::string& msg) -> void {
    throw ConfigError(name + ":" + std::to_string(line) + ": " + msg);
  };
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) fail(1, "empty file");
  ++lineno;
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (detail::lower(tag) != "%%matrixmarket") fail(lineno, "missing %%MatrixMarket banner");
  if (detail::lower(object) != "matrix") fail(lineno, "unsupported object '" + object + "'");
  if (detail::lower(format) != "coordinate")
    fail(lineno, "unsupported format '" + format + "' (coordinate required)");
  field = detail::lower(field);
  if (field != "real" && field != "integer")
    fail(lineno, "unsupported field '" + field + "' (real or integer required)");
  symmetry = detail::lower(symmetry);
  if (symmetry != "general" && symmetry != "symmetric")
    fail(lineno, "unsupported symmetry '" + symmetry + "'");
  const bool symmetric = symmetry == "symmetric";

  index_t rows = 0, cols = 0;
  std::size_t declared = 0;
  bool have_size = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line[0] == '%') continue;
    if (detail::blank(line)) continue;
    std::istringstream ss(line);
    if (!(ss >> rows >> cols >> declared)) fail(lineno, "malformed size line");
    std::string rest;
    if (ss >> rest) fail(lineno, "trailing tokens on size line");
    if (rows <= 0 || cols <= 0) fail(lineno, "non-positive dimensions");
    have_size = true;
    break;
  }
  if (!have_size) fail(lineno + 1, "missing size line");

  std::vector<Triplet> entries;
  entries.reserve(symmetric ? declared * 2 : declared);
  std::size_t seen = 0;
  while (seen < declared) {
    if (!std::getline(in, line))
      fail(lineno + 1, "body truncated: header declares " + std::to_string(declared) +
                           " entries, file ends after " + std::to_string(seen));
    ++lineno;
    if (!line.empty() && line[0] == '%') continue;
    if (detail::blank(line)) continue;
    std::istringstream ss(line);
    index_t i = 0, j = 0;
    double v = 0.0;
    if (!(ss >> i >> j >> v)) fail(lineno, "malformed entry");
    if (i < 1 || i > rows || j < 1 || j > cols)
      fail(lineno, "index (" + std::to_string(i) + ", " + std::to_string(j) +
                       ") outside declared " + std::to_string(rows) + "x" + std::to_string(cols));
    entries.push_back({i - 1, j - 1, v});
    if (symmetric && i != j) entries.push_back({j - 1, i - 1, v});
    ++seen;
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line[0] == '%') continue;
    if (!detail::blank(line)) fail(lineno, "trailing data past the declared entry count");
  }
  return CsrMatrix::from_triplets(rows, cols, std::move(entries));
}

inline CsrMatrix parse_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open matrix file: " + path);
  return parse_matrix_market(in, path);
}

/// Writes coordinate real general with full precision so a parse round-trip
/// reproduces the matrix bit-exactly.
inline void write_matrix_market(const CsrMatrix& a, std::ostream& out,
                                const std::string& header_comment = "") {
  out << "%%MatrixMarket matrix coordinate real general\n";
  if (!header_comment.empty()) {
    std::istringstream ss(header_comment);
    std::string line;
    while (std::getline(ss, line)) out << "%" << line << "\n";
  }
  out << a.n_rows << " " << a.n_cols << " " << a.nnz() << "\n";
  for (index_t i = 0; i < a.n_rows; ++i)
    for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      out << (i + 1) << " " << (a.col_indices[k] + 1) << " "
          << detail::format_double(a.values[k]) << "\n";
}

inline void write_matrix_market(const CsrMatrix& a, const std::string& path,
                                const std::string& header_comment = "") {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write matrix file: " + path);
  write_matrix_market(a, out, header_comment);
}

/// Dense vector as a Matrix Market array (n x 1).
inline void write_vector_mm(const DenseVector& v, std::ostream& out,
                            const std::string& header_comment = "") {
  out << "%%MatrixMarket matrix array real general\n";
  if (!header_comment.empty()) {
    std::istringstream ss(header_comment);
    std::string line;
    while (std::getline(ss, line)) out << "%" << line << "\n";
  }
  out << v.size() << " 1\n";
  for (double x : v) out << detail::format_double(x) << "\n";
}

inline void write_vector_mm(const DenseVector& v, const std::string& path,
                            const std::string& header_comment = "") {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vector file: " + path);
  write_vector_mm(v, out, header_comment);
}

inline DenseVector read_vector_mm(std::istream& in, const std::string& name) {
  auto fail = [&](std::size_t line, const std::string& msg) -> void {
    throw ConfigError(name + ":" + std::to_string(line) + ": " + msg);
  };
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) fail(1, "empty file");
  ++lineno;
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (detail::lower(tag) != "%%matrixmarket" || detail::lower(format) != "array" ||
      (detail::lower(field) != "real" && detail::lower(field) != "integer"))
    fail(lineno, "expected a real array Matrix Market banner");
  std::size_t n = 0, m = 0;
  bool have_size = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line[0] == '%') continue;
    if (detail::blank(line)) continue;
    std::istringstream ss(line);
    if (!(ss >> n >> m)) fail(lineno, "malformed size line");
    if (m != 1) fail(lineno, "expected a single-column vector");
    have_size = true;
    break;
  }
  if (!have_size) fail(lineno + 1, "missing size line");
  DenseVector v;
  v.reserve(n);
  while (v.size() < n) {
    if (!std::getline(in, line)) fail(lineno + 1, "vector body truncated");
    ++lineno;
    if (!line.empty() && line[0] == '%') continue;
    if (detail::blank(line)) continue;
    std::istringstream ss(line);
    double x = 0.0;
    while (ss >> x) v.push_back(x);
  }
  if (v.size() != n) fail(lineno, "vector body longer than declared");
  return v;
}

inline DenseVector read_vector_mm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vector file: " + path);
  return read_vector_mm(in, path);
}

}  // namespace solvertune
