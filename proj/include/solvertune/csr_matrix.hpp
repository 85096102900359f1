#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "solvertune/errors.hpp"

namespace solvertune {

using index_t = std::int64_t;
using DenseVector = std::vector<double>;

struct Triplet {
  index_t row = 0;
  index_t col = 0;
  double value = 0.0;
};

/// Compressed sparse row matrix. Rows hold strictly increasing column
/// indices and no duplicates; immutable by convention once built.
struct CsrMatrix {
  index_t n_rows = 0;
  index_t n_cols = 0;
  std::vector<index_t> row_offsets;  // length n_rows + 1
  std::vector<index_t> col_indices;
  std::vector<double> values;

  CsrMatrix() : row_offsets(1, 0) {}
  CsrMatrix(index_t rows, index_t cols)
      : n_rows(rows), n_cols(cols), row_offsets(static_cast<std::size_t>(rows) + 1, 0) {}

  index_t nnz() const { return static_cast<index_t>(values.size()); }

  std::span<const index_t> row_cols(index_t i) const {
    return {col_indices.data() + row_offsets[i],
            static_cast<std::size_t>(row_offsets[i + 1] - row_offsets[i])};
  }
  std::span<const double> row_vals(index_t i) const {
    return {values.data() + row_offsets[i],
            static_cast<std::size_t>(row_offsets[i + 1] - row_offsets[i])};
  }

  /// Value at (i, j), 0 if not stored. Binary search within the row.
  double at(index_t i, index_t j) const {
    auto cols = row_cols(i);
    auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) return 0.0;
    return values[row_offsets[i] + (it - cols.begin())];
  }

  double diagonal(index_t i) const { return at(i, i); }

  bool operator==(const CsrMatrix& other) const = default;

  /// Structural sanity check; throws on violation.
  void validate() const {
    if (row_offsets.size() != static_cast<std::size_t>(n_rows) + 1)
      throw std::logic_error("csr: row_offsets size mismatch");
    if (row_offsets.front() != 0 || row_offsets.back() != nnz())
      throw std::logic_error("csr: offset bounds mismatch");
    if (col_indices.size() != values.size())
      throw std::logic_error("csr: col/value size mismatch");
    for (index_t i = 0; i < n_rows; ++i) {
      if (row_offsets[i] > row_offsets[i + 1])
        throw std::logic_error("csr: decreasing offsets at row " + std::to_string(i));
      for (index_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k) {
        if (col_indices[k] < 0 || col_indices[k] >= n_cols)
          throw std::logic_error("csr: column out of range in row " + std::to_string(i));
        if (k > row_offsets[i] && col_indices[k] <= col_indices[k - 1])
          throw std::logic_error("csr: unsorted or duplicate column in row " + std::to_string(i));
      }
    }
  }

  /// Build from triplets: stable-sorts by (row, col), sums duplicates in
  /// input order, drops nothing else.
  static CsrMatrix from_triplets(index_t rows, index_t cols, std::vector<Triplet> t) {
    for (const Triplet& e : t) {
      if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
        throw std::invalid_argument("triplet index out of range");
    }
    std::stable_sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    CsrMatrix m(rows, cols);
    m.col_indices.reserve(t.size());
    m.values.reserve(t.size());
    std::size_t k = 0;
    for (index_t i = 0; i < rows; ++i) {
      while (k < t.size() && t[k].row == i) {
        double v = t[k].value;
        index_t c = t[k].col;
        ++k;
        while (k < t.size() && t[k].row == i && t[k].col == c) {
          v += t[k].value;
          ++k;
        }
        m.col_indices.push_back(c);
        m.values.push_back(v);
      }
      m.row_offsets[i + 1] = static_cast<index_t>(m.col_indices.size());
    }
    return m;
  }
};

inline void check_dim(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("dimension mismatch in ") + what);
}

inline void spmv_into(const CsrMatrix& a, const DenseVector& x, DenseVector& y) {
  check_dim(static_cast<index_t>(x.size()) == a.n_cols, "spmv");
  y.resize(static_cast<std::size_t>(a.n_rows));
  for (index_t i = 0; i < a.n_rows; ++i) {
    double s = 0.0;
    for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      s += a.values[k] * x[a.col_indices[k]];
    y[i] = s;
  }
}

inline DenseVector spmv(const CsrMatrix& a, const DenseVector& x) {
  DenseVector y;
  spmv_into(a, x, y);
  return y;
}

inline double dot(const DenseVector& x, const DenseVector& y) {
  check_dim(x.size() == y.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(const DenseVector& x) { return std::sqrt(dot(x, x)); }

/// y := a*x + y
inline void axpy_into(double a, const DenseVector& x, DenseVector& y) {
  check_dim(x.size() == y.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

/// Returns a*x + y.
inline DenseVector axpy(double a, const DenseVector& x, const DenseVector& y) {
  DenseVector r = y;
  axpy_into(a, x, r);
  return r;
}

inline CsrMatrix transpose(const CsrMatrix& a) {
  CsrMatrix t(a.n_cols, a.n_rows);
  t.col_indices.assign(a.values.size(), 0);
  t.values.assign(a.values.size(), 0.0);
  std::vector<index_t> count(static_cast<std::size_t>(a.n_cols) + 1, 0);
  for (index_t c : a.col_indices) ++count[c + 1];
  for (index_t j = 0; j < a.n_cols; ++j) count[j + 1] += count[j];
  t.row_offsets.assign(count.begin(), count.end());
  std::vector<index_t> cursor(count.begin(), count.end() - 1);
  for (index_t i = 0; i < a.n_rows; ++i) {
    for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
      index_t pos = cursor[a.col_indices[k]]++;
      t.col_indices[pos] = i;
      t.values[pos] = a.values[k];
    }
  }
  return t;
}

/// Sparse matrix product A*B. For each output row, contributions accumulate
/// in order of A's (sorted) row entries; columns are emitted sorted. The
/// Galerkin verification recomputes products with the same accumulation
/// order, which is what makes the bit-exact comparison possible.
inline CsrMatrix spgemm(const CsrMatrix& a, const CsrMatrix& b) {
  check_dim(a.n_cols == b.n_rows, "spgemm");
  CsrMatrix c(a.n_rows, b.n_cols);
  std::vector<double> scratch(static_cast<std::size_t>(b.n_cols), 0.0);
  std::vector<char> touched(static_cast<std::size_t>(b.n_cols), 0);
  std::vector<index_t> cols;
  for (index_t i = 0; i < a.n_rows; ++i) {
    cols.clear();
    for (index_t ka = a.row_offsets[i]; ka < a.row_offsets[i + 1]; ++ka) {
      const index_t m = a.col_indices[ka];
      const double va = a.values[ka];
      for (index_t kb = b.row_offsets[m]; kb < b.row_offsets[m + 1]; ++kb) {
        const index_t j = b.col_indices[kb];
        if (!touched[j]) {
          touched[j] = 1;
          scratch[j] = 0.0;
          cols.push_back(j);
        }
        scratch[j] += va * b.values[kb];
      }
    }
    std::sort(cols.begin(), cols.end());
    for (index_t j : cols) {
      c.col_indices.push_back(j);
      c.values.push_back(scratch[j]);
      touched[j] = 0;
    }
    c.row_offsets[i + 1] = static_cast<index_t>(c.col_indices.size());
  }
  return c;
}

/// max_ij |A_ij - B_ij| over the union pattern.
inline double max_abs_diff(const CsrMatrix& a, const CsrMatrix& b) {
  check_dim(a.n_rows == b.n_rows && a.n_cols == b.n_cols, "max_abs_diff");
  double worst = 0.0;
  for (index_t i = 0; i < a.n_rows; ++i) {
    index_t ka = a.row_offsets[i], kb = b.row_offsets[i];
    const index_t ea = a.row_offsets[i + 1], eb = b.row_offsets[i + 1];
    while (ka < ea || kb < eb) {
      index_t ca = ka < ea ? a.col_indices[ka] : a.n_cols;
      index_t cb = kb < eb ? b.col_indices[kb] : b.n_cols;
      double va = 0.0, vb = 0.0;
      if (ca <= cb) va = a.values[ka++];
      if (cb <= ca) vb = b.values[kb++];
      worst = std::max(worst, std::fabs(va - vb));
    }
  }
  return worst;
}

/// max_ij |A_ij - A_ji|; 0 for exactly symmetric matrices.
inline double symmetry_gap(const CsrMatrix& a) { return max_abs_diff(a, transpose(a)); }

}  // namespace solvertune
