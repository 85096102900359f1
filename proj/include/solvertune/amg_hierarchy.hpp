#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "solvertune/csr_matrix.hpp"
#include "solvertune/errors.hpp"
#include "solvertune/rng.hpp"
#include "solvertune/solver_config.hpp"

namespace solvertune {

/// Dense LU with partial pivoting for the coarsest-level operator.
class DenseLu {
 public:
  DenseLu() = default;

  static DenseLu factor(const CsrMatrix& a, int level) {
    DenseLu lu;
    lu.n_ = a.n_rows;
    const std::size_t n = static_cast<std::size_t>(lu.n_);
    lu.data_.assign(n * n, 0.0);
    for (index_t i = 0; i < a.n_rows; ++i)
      for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
        lu.data_[static_cast<std::size_t>(i) * n + a.col_indices[k]] = a.values[k];
    lu.piv_.resize(n);
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t pivot = col;
      double best = std::fabs(lu.data_[col * n + col]);
      for (std::size_t r = col + 1; r < n; ++r) {
        const double cand = std::fabs(lu.data_[r * n + col]);
        if (cand > best) {
          best = cand;
          pivot = r;
        }
      }
      if (best == 0.0)
        throw SolverSetupError("structurally singular coarsest operator at level " +
                               std::to_string(level) + " (zero pivot in column " +
                               std::to_string(col) + ")");
      lu.piv_[col] = pivot;
      if (pivot != col)
        for (std::size_t j = 0; j < n; ++j)
          std::swap(lu.data_[col * n + j], lu.data_[pivot * n + j]);
      const double d = lu.data_[col * n + col];
      for (std::size_t r = col + 1; r < n; ++r) {
        const double f = lu.data_[r * n + col] / d;
        lu.data_[r * n + col] = f;
        if (f != 0.0)
          for (std::size_t j = col + 1; j < n; ++j) lu.data_[r * n + j] -= f * lu.data_[col * n + j];
      }
    }
    return lu;
  }

  index_t size() const { return n_; }

  void solve_into(const DenseVector& b, DenseVector& x) const {
    const std::size_t n = static_cast<std::size_t>(n_);
    x = b;
    for (std::size_t col = 0; col < n; ++col)
      if (piv_[col] != col) std::swap(x[col], x[piv_[col]]);
    for (std::size_t r = 1; r < n; ++r) {
      double s = x[r];
      for (std::size_t j = 0; j < r; ++j) s -= data_[r * n + j] * x[j];
      x[r] = s;
    }
    for (std::size_t r = n; r-- > 0;) {
      double s = x[r];
      for (std::size_t j = r + 1; j < n; ++j) s -= data_[r * n + j] * x[j];
      x[r] = s / data_[r * n + r];
    }
  }

 private:
  index_t n_ = 0;
  std::vector<double> data_;
  std::vector<std::size_t> piv_;
};

/// One multigrid level: operator, interpolation to this level from the next
/// coarser one (absent on the coarsest), inverse diagonal and the Chebyshev
/// eigenvalue bound of the diagonally scaled operator.
struct AmgLevel {
  CsrMatrix A;
  CsrMatrix P;  // n_rows(A) x n_coarse; empty on the coarsest level
  bool has_coarse = false;
  DenseVector inv_diag;
  double lambda_max = 0.0;  // upper bound for D^{-1} A
};

struct AmgHierarchy {
  std::vector<AmgLevel> levels;
  DenseLu coarse_lu;

  std::size_t num_levels() const { return levels.size(); }
  index_t coarsest_size() const { return levels.back().A.n_rows; }
  double total_nnz() const {
    double s = 0;
    for (const AmgLevel& l : levels) s += static_cast<double>(l.A.nnz());
    return s;
  }
  /// Sum of level nnz over fine nnz; the usual AMG grid quality number.
  double operator_complexity() const {
    return levels.empty() ? 0.0 : total_nnz() / static_cast<double>(levels.front().A.nnz());
  }
};

/// Deterministic setup limits. Degenerate configurations must fail fast and
/// reproducibly, not hang: a blown-up hierarchy or an unfactorizably large
/// "coarsest" level is a setup error that the evaluator turns into infinite
/// fitness.
struct BuildGuards {
  double max_operator_complexity = 50.0;
  int max_levels = 30;
  index_t factor_cap_floor = 1000;  // dense LU allowed up to max(this, 2*coarse_matrix_size)
  std::optional<std::chrono::steady_clock::time_point> deadline;  // wall-time mode only
};

namespace amg_detail {

enum class PointState : char { undecided, coarse, fine };

/// Strength-of-connection graph: j in S(i) iff -a_ij >= theta * max_k(-a_ik).
/// Rows whose scaled row sum |sum_j a_ij| / |a_ii| exceeds max_row_sum are
/// treated as weakly connected throughout (diagonal-only).
struct StrengthGraph {
  std::vector<index_t> offsets;
  std::vector<index_t> cols;

  std::span<const index_t> row(index_t i) const {
    return {cols.data() + offsets[i], static_cast<std::size_t>(offsets[i + 1] - offsets[i])};
  }
};

inline StrengthGraph strength_graph(const CsrMatrix& a, double theta, double max_row_sum) {
  StrengthGraph s;
  s.offsets.assign(static_cast<std::size_t>(a.n_rows) + 1, 0);
  s.cols.reserve(static_cast<std::size_t>(a.nnz()));
  for (index_t i = 0; i < a.n_rows; ++i) {
    const double diag = a.diagonal(i);
    bool weak_row = diag == 0.0;
    if (!weak_row && max_row_sum < 1.0) {
      double row_sum = 0.0;
      for (double v : a.row_vals(i)) row_sum += v;
      if (std::fabs(row_sum) / std::fabs(diag) > max_row_sum) weak_row = true;
    }
    if (!weak_row) {
      double max_neg = 0.0;
      auto cols = a.row_cols(i);
      auto vals = a.row_vals(i);
      for (std::size_t k = 0; k < cols.size(); ++k)
        if (cols[k] != i) max_neg = std::max(max_neg, -vals[k]);
      if (max_neg > 0.0) {
        const double cut = theta * max_neg;
        for (std::size_t k = 0; k < cols.size(); ++k)
          if (cols[k] != i && -vals[k] > 0.0 && -vals[k] >= cut) s.cols.push_back(cols[k]);
      }
    }
    s.offsets[i + 1] = static_cast<index_t>(s.cols.size());
  }
  return s;
}

inline StrengthGraph transpose_graph(const StrengthGraph& s, index_t n) {
  StrengthGraph t;
  t.offsets.assign(static_cast<std::size_t>(n) + 1, 0);
  for (index_t c : s.cols) ++t.offsets[c + 1];
  for (index_t i = 0; i < n; ++i) t.offsets[i + 1] += t.offsets[i];
  t.cols.assign(s.cols.size(), 0);
  std::vector<index_t> cursor(t.offsets.begin(), t.offsets.end() - 1);
  for (index_t i = 0; i < n; ++i)
    for (index_t k = s.offsets[i]; k < s.offsets[i + 1]; ++k) t.cols[cursor[s.cols[k]]++] = i;
  return t;
}

/// Ruge-Stueben first-pass splitting: measures are dependent counts, F-point
/// neighbours bump the measures of what they depend on. Deterministic via a
/// lazy max-heap with index tie-breaking.
inline std::vector<PointState> coarsen_classical_rs(const StrengthGraph& s,
                                                    const StrengthGraph& st, index_t n) {
  std::vector<PointState> state(static_cast<std::size_t>(n), PointState::undecided);
  std::vector<index_t> measure(static_cast<std::size_t>(n));
  // pair: (measure, -index) so ties pick the smallest row
  std::priority_queue<std::pair<index_t, index_t>> heap;
  for (index_t i = 0; i < n; ++i) {
    measure[i] = st.offsets[i + 1] - st.offsets[i];
    heap.emplace(measure[i], -i);
  }
  auto isolated = [&](index_t i) {
    return s.offsets[i + 1] == s.offsets[i] && st.offsets[i + 1] == st.offsets[i];
  };
  while (!heap.empty()) {
    auto [m, negi] = heap.top();
    heap.pop();
    const index_t i = -negi;
    if (state[i] != PointState::undecided || m != measure[i]) continue;
    if (isolated(i)) {
      state[i] = PointState::fine;  // nothing depends on it; smoother handles it
      continue;
    }
    state[i] = PointState::coarse;
    for (index_t k = st.offsets[i]; k < st.offsets[i + 1]; ++k) {
      const index_t j = st.cols[k];
      if (state[j] != PointState::undecided) continue;
      state[j] = PointState::fine;
      for (index_t q = s.offsets[j]; q < s.offsets[j + 1]; ++q) {
        const index_t w = s.cols[q];
        if (state[w] == PointState::undecided) {
          ++measure[w];
          heap.emplace(measure[w], -w);
        }
      }
    }
  }
  return state;
}

/// PMIS-style independent-set coarsening. Measures are dependent counts plus
/// a deterministic per-row hash in [0,1); points nobody depends on start as F.
inline std::vector<PointState> coarsen_pmis_like(const StrengthGraph& s, const StrengthGraph& st,
                                                 index_t n) {
  std::vector<PointState> state(static_cast<std::size_t>(n), PointState::undecided);
  std::vector<double> measure(static_cast<std::size_t>(n));
  std::vector<index_t> undecided;
  for (index_t i = 0; i < n; ++i) {
    const index_t deps = st.offsets[i + 1] - st.offsets[i];
    measure[i] = static_cast<double>(deps) +
                 static_cast<double>(splitmix64(static_cast<std::uint64_t>(i)) >> 11) * 0x1.0p-53;
    if (deps == 0)
      state[i] = PointState::fine;
    else
      undecided.push_back(i);
  }
  auto beats = [&](index_t a, index_t b) {
    if (measure[a] != measure[b]) return measure[a] > measure[b];
    return a < b;
  };
  std::vector<index_t> selected;
  while (!undecided.empty()) {
    selected.clear();
    for (index_t i : undecided) {
      bool is_max = true;
      for (index_t k = s.offsets[i]; k < s.offsets[i + 1] && is_max; ++k) {
        const index_t j = s.cols[k];
        if (state[j] == PointState::undecided && beats(j, i)) is_max = false;
      }
      for (index_t k = st.offsets[i]; k < st.offsets[i + 1] && is_max; ++k) {
        const index_t j = st.cols[k];
        if (state[j] == PointState::undecided && beats(j, i)) is_max = false;
      }
      if (is_max) selected.push_back(i);
    }
    for (index_t i : selected) state[i] = PointState::coarse;
    for (index_t i : selected) {
      for (index_t k = s.offsets[i]; k < s.offsets[i + 1]; ++k)
        if (state[s.cols[k]] == PointState::undecided) state[s.cols[k]] = PointState::fine;
      for (index_t k = st.offsets[i]; k < st.offsets[i + 1]; ++k)
        if (state[st.cols[k]] == PointState::undecided) state[st.cols[k]] = PointState::fine;
    }
    std::vector<index_t> next;
    next.reserve(undecided.size());
    for (index_t i : undecided)
      if (state[i] == PointState::undecided) next.push_back(i);
    undecided.swap(next);
  }
  return state;
}

struct WeightedEntry {
  index_t col;  // coarse-numbered column
  double w;
};

/// Truncation: drop |w| < trunc_factor * max|w|, cap at p_max largest (0 = no
/// cap), rescale survivors to preserve the original row sum.
inline void truncate_row(std::vector<WeightedEntry>& row, double trunc_factor, int p_max) {
  if (row.empty()) return;
  double row_sum = 0.0, max_abs = 0.0;
  for (const WeightedEntry& e : row) {
    row_sum += e.w;
    max_abs = std::max(max_abs, std::fabs(e.w));
  }
  if (trunc_factor > 0.0 && max_abs > 0.0) {
    const double cut = trunc_factor * max_abs;
    std::erase_if(row, [cut](const WeightedEntry& e) { return std::fabs(e.w) < cut; });
  }
  if (p_max > 0 && static_cast<int>(row.size()) > p_max) {
    std::sort(row.begin(), row.end(), [](const WeightedEntry& a, const WeightedEntry& b) {
      const double fa = std::fabs(a.w), fb = std::fabs(b.w);
      if (fa != fb) return fa > fb;
      return a.col < b.col;
    });
    row.resize(static_cast<std::size_t>(p_max));
  }
  double kept_sum = 0.0;
  for (const WeightedEntry& e : row) kept_sum += e.w;
  if (kept_sum != 0.0 && row_sum != 0.0) {
    const double scale = row_sum / kept_sum;
    for (WeightedEntry& e : row) e.w *= scale;
  }
  std::sort(row.begin(), row.end(),
            [](const WeightedEntry& a, const WeightedEntry& b) { return a.col < b.col; });
}

/// Direct interpolation for F-point i: split the full neighbourhood sums by
/// sign over the strong coarse set; positive couplings with no coarse
/// counterpart are lumped into the diagonal.
inline std::vector<WeightedEntry> direct_interp_row(const CsrMatrix& a, const StrengthGraph& s,
                                                    const std::vector<PointState>& state,
                                                    const std::vector<index_t>& coarse_id,
                                                    index_t i) {
  auto cols = a.row_cols(i);
  auto vals = a.row_vals(i);
  auto srow = s.row(i);
  double neg_all = 0.0, pos_all = 0.0, neg_c = 0.0, pos_c = 0.0, diag = 0.0;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const index_t j = cols[k];
    const double v = vals[k];
    if (j == i) {
      diag = v;
      continue;
    }
    const bool strong_c =
        state[j] == PointState::coarse && std::binary_search(srow.begin(), srow.end(), j);
    if (v < 0.0) {
      neg_all += v;
      if (strong_c) neg_c += v;
    } else {
      pos_all += v;
      if (strong_c) pos_c += v;
    }
  }
  if (pos_c == 0.0) diag += pos_all;  // nowhere to send positive couplings
  std::vector<WeightedEntry> row;
  if (diag == 0.0) return row;
  const double alpha = neg_c != 0.0 ? neg_all / neg_c : 0.0;
  const double beta = pos_c != 0.0 ? pos_all / pos_c : 0.0;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const index_t j = cols[k];
    if (j == i || state[j] != PointState::coarse) continue;
    if (!std::binary_search(srow.begin(), srow.end(), j)) continue;
    const double v = vals[k];
    const double w = v < 0.0 ? -alpha * v / diag : -beta * v / diag;
    if (w != 0.0) row.push_back({coarse_id[j], w});
  }
  return row;
}

/// Classical Ruge-Stueben interpolation: strong F neighbours distribute their
/// couplings over the common strong-coarse set; weak couplings and strong F
/// neighbours with no common coarse point fold into the diagonal.
inline std::vector<WeightedEntry> classical_interp_row(const CsrMatrix& a, const StrengthGraph& s,
                                                       const std::vector<PointState>& state,
                                                       const std::vector<index_t>& coarse_id,
                                                       index_t i) {
  auto cols = a.row_cols(i);
  auto vals = a.row_vals(i);
  auto srow = s.row(i);
  std::vector<index_t> strong_c;
  std::vector<index_t> strong_f;
  double denom = 0.0;
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const index_t j = cols[k];
    const double v = vals[k];
    if (j == i) {
      denom += v;
      continue;
    }
    const bool strong = std::binary_search(srow.begin(), srow.end(), j);
    if (strong && state[j] == PointState::coarse)
      strong_c.push_back(j);
    else if (strong && state[j] == PointState::fine)
      strong_f.push_back(j);
    else
      denom += v;  // weak coupling folds into the diagonal
  }
  if (strong_c.empty()) return {};

  // numerators per strong coarse neighbour, keyed by position in strong_c
  std::vector<double> num(strong_c.size(), 0.0);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const index_t j = cols[k];
    if (j == i) continue;
    auto it = std::lower_bound(strong_c.begin(), strong_c.end(), j);
    if (it != strong_c.end() && *it == j) num[it - strong_c.begin()] += vals[k];
  }
  for (index_t f : strong_f) {
    const double sign_f = a.diagonal(f) >= 0.0 ? 1.0 : -1.0;
    auto fcols = a.row_cols(f);
    auto fvals = a.row_vals(f);
    // couplings from f to the common coarse set, opposite sign to f's diagonal
    double dist_sum = 0.0;
    for (std::size_t k = 0; k < fcols.size(); ++k) {
      const index_t m = fcols[k];
      if (m == f || fvals[k] * sign_f >= 0.0) continue;
      if (std::binary_search(strong_c.begin(), strong_c.end(), m)) dist_sum += fvals[k];
    }
    const double a_if = a.at(i, f);
    if (dist_sum == 0.0) {
      denom += a_if;  // no common coarse point: treat as weak
      continue;
    }
    for (std::size_t k = 0; k < fcols.size(); ++k) {
      const index_t m = fcols[k];
      if (m == f || fvals[k] * sign_f >= 0.0) continue;
      auto it = std::lower_bound(strong_c.begin(), strong_c.end(), m);
      if (it != strong_c.end() && *it == m)
        num[it - strong_c.begin()] += a_if * fvals[k] / dist_sum;
    }
  }
  if (denom == 0.0) return {};
  std::vector<WeightedEntry> row;
  row.reserve(strong_c.size());
  for (std::size_t k = 0; k < strong_c.size(); ++k) {
    const double w = -num[k] / denom;
    if (w != 0.0) row.push_back({coarse_id[strong_c[k]], w});
  }
  return row;
}

/// 10 power iterations on D^{-1} A from the all-ones vector (Rayleigh
/// quotient). Smooth start vectors undershoot badly on discretized
/// operators, so build_hierarchy clamps the stored bound with the Gershgorin
/// row-sum bound, which always encloses the spectrum.
inline double estimate_lambda_max_power(const CsrMatrix& a, const DenseVector& inv_diag) {
  const std::size_t n = static_cast<std::size_t>(a.n_rows);
  DenseVector v(n, 1.0), w(n);
  double est = 0.0;
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  for (double& x : v) x *= inv_sqrt_n;
  for (int it = 0; it < 10; ++it) {
    spmv_into(a, v, w);
    for (std::size_t i = 0; i < n; ++i) w[i] *= inv_diag[i];
    est = dot(v, w);
    const double nw = norm2(w);
    if (nw == 0.0 || !std::isfinite(nw)) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
  }
  return est;
}

inline double gershgorin_bound(const CsrMatrix& a, const DenseVector& inv_diag) {
  double bound = 0.0;
  for (index_t i = 0; i < a.n_rows; ++i) {
    double s = 0.0;
    for (double v : a.row_vals(i)) s += std::fabs(v);
    bound = std::max(bound, s * std::fabs(inv_diag[i]));
  }
  return bound;
}

inline double estimate_lambda_max(const CsrMatrix& a, const DenseVector& inv_diag) {
  const double raw = estimate_lambda_max_power(a, inv_diag);
  if (raw <= 0.0 || !std::isfinite(raw)) return raw;
  return std::min(gershgorin_bound(a, inv_diag), 1.4 * raw);
}

}  // namespace amg_detail

/// Builds the multigrid hierarchy for A under cfg: strength graph, C/F
/// splitting, interpolation with truncation, Galerkin coarse operators,
/// Chebyshev bounds per level and the dense factorization of the coarsest
/// operator. Throws SolverSetupError on degenerate outcomes.
inline AmgHierarchy build_hierarchy(const CsrMatrix& a_fine, const SolverConfig& cfg,
                                    const BuildGuards& guards = {}) {
  using namespace amg_detail;
  if (a_fine.n_rows != a_fine.n_cols) throw ConfigError("hierarchy requires a square matrix");
  AmgHierarchy h;
  CsrMatrix a = a_fine;
  const double fine_nnz = static_cast<double>(std::max<index_t>(a_fine.nnz(), 1));
  double nnz_so_far = 0.0;

  while (true) {
    if (guards.deadline && std::chrono::steady_clock::now() > *guards.deadline)
      throw SolverSetupError("hierarchy setup exceeded the time budget");
    nnz_so_far += static_cast<double>(a.nnz());
    if (nnz_so_far / fine_nnz > guards.max_operator_complexity)
      throw SolverSetupError("hierarchy operator complexity exceeded " +
                             std::to_string(guards.max_operator_complexity) + " at level " +
                             std::to_string(h.levels.size()));

    AmgLevel level;
    level.A = std::move(a);
    const index_t n = level.A.n_rows;
    level.inv_diag.resize(static_cast<std::size_t>(n));
    for (index_t i = 0; i < n; ++i) {
      const double d = level.A.diagonal(i);
      if (d == 0.0)
        throw SolverSetupError("zero diagonal at level " + std::to_string(h.levels.size()) +
                               ", row " + std::to_string(i));
      level.inv_diag[i] = 1.0 / d;
    }
    level.lambda_max = estimate_lambda_max(level.A, level.inv_diag);

    const bool small_enough = n <= cfg.coarse_matrix_size;
    const bool level_cap = static_cast<int>(h.levels.size()) + 1 >= guards.max_levels;
    if (small_enough || level_cap) {
      h.levels.push_back(std::move(level));
      break;
    }

    StrengthGraph s = strength_graph(level.A, cfg.strength_threshold, cfg.max_row_sum);
    StrengthGraph st = transpose_graph(s, n);
    std::vector<PointState> state = cfg.coarsening == CoarseningType::classical_rs
                                        ? coarsen_classical_rs(s, st, n)
                                        : coarsen_pmis_like(s, st, n);
    std::vector<index_t> coarse_id(static_cast<std::size_t>(n), -1);
    index_t n_coarse = 0;
    for (index_t i = 0; i < n; ++i)
      if (state[i] == PointState::coarse) coarse_id[i] = n_coarse++;

    // Coarsening stalled or collapsed: current level becomes the coarsest.
    if (n_coarse == 0 || static_cast<double>(n_coarse) > 0.9 * static_cast<double>(n)) {
      h.levels.push_back(std::move(level));
      break;
    }

    CsrMatrix p(n, n_coarse);
    std::vector<WeightedEntry> row;
    for (index_t i = 0; i < n; ++i) {
      if (state[i] == PointState::coarse) {
        p.col_indices.push_back(coarse_id[i]);
        p.values.push_back(1.0);
      } else {
        row = cfg.interpolation == InterpType::direct
                  ? direct_interp_row(level.A, s, state, coarse_id, i)
                  : classical_interp_row(level.A, s, state, coarse_id, i);
        truncate_row(row, cfg.trunc_factor, cfg.p_max_elements);
        for (const WeightedEntry& e : row) {
          p.col_indices.push_back(e.col);
          p.values.push_back(e.w);
        }
      }
      p.row_offsets[i + 1] = static_cast<index_t>(p.col_indices.size());
    }

    CsrMatrix pt = transpose(p);
    CsrMatrix a_coarse = spgemm(spgemm(pt, level.A), p);
    level.P = std::move(p);
    level.has_coarse = true;
    h.levels.push_back(std::move(level));
    a = std::move(a_coarse);
  }

  const index_t coarsest = h.coarsest_size();
  const index_t factor_cap =
      std::max<index_t>(guards.factor_cap_floor, 2 * static_cast<index_t>(cfg.coarse_matrix_size));
  if (coarsest > factor_cap)
    throw SolverSetupError("coarsest level of size " + std::to_string(coarsest) +
                           " is too large to factorize (cap " + std::to_string(factor_cap) +
                           "); coarsening stalled");
  h.coarse_lu = DenseLu::factor(h.levels.back().A, static_cast<int>(h.levels.size()) - 1);
  return h;
}

}  // namespace solvertune
