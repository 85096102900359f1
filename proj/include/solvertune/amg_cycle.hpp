#pragma once

#include <vector>

#include "solvertune/amg_hierarchy.hpp"
#include "solvertune/chebyshev.hpp"
#include "solvertune/csr_matrix.hpp"
#include "solvertune/solver_config.hpp"

namespace solvertune {
namespace cycle_detail {

inline ChebyshevBounds bounds_for(const AmgLevel& level, double spectrum_fraction) {
  return {spectrum_fraction * level.lambda_max, level.lambda_max};
}

/// One multigrid cycle of the given type at `level`, improving x for
/// A_level x = b. Visiting the coarsest level means one direct solve; W does
/// two recursive calls per descent, F does an F-recursion then a V-recursion.
inline void mg_cycle(const AmgHierarchy& h, const SolverConfig& cfg, std::size_t level,
                     CycleType type, DenseVector& x, const DenseVector& b, WorkCounter& wc) {
  const AmgLevel& l = h.levels[level];
  if (!l.has_coarse) {
    h.coarse_lu.solve_into(b, x);
    wc.add(static_cast<double>(l.A.n_rows) * static_cast<double>(l.A.n_rows));
    ++wc.coarse_solves;
    return;
  }
  chebyshev_smooth_into(l.A, l.inv_diag, bounds_for(l, cfg.pre_spectrum_fraction),
                        cfg.pre_cheby_order, x, b, &wc);

  const std::size_t nf = static_cast<std::size_t>(l.A.n_rows);
  DenseVector r(nf);
  spmv_into(l.A, x, r);
  wc.add(static_cast<double>(l.A.nnz()));
  for (std::size_t i = 0; i < nf; ++i) r[i] = b[i] - r[i];

  const std::size_t nc = static_cast<std::size_t>(l.P.n_cols);
  DenseVector rc(nc, 0.0);
  // restriction by P^T without materializing the transpose
  for (index_t i = 0; i < l.P.n_rows; ++i)
    for (index_t k = l.P.row_offsets[i]; k < l.P.row_offsets[i + 1]; ++k)
      rc[l.P.col_indices[k]] += l.P.values[k] * r[i];
  wc.add(static_cast<double>(l.P.nnz()));

  DenseVector ec(nc, 0.0);
  const bool child_is_coarsest = !h.levels[level + 1].has_coarse;
  if (child_is_coarsest) {
    mg_cycle(h, cfg, level + 1, type, ec, rc, wc);  // single exact solve
  } else {
    switch (type) {
      case CycleType::V:
        mg_cycle(h, cfg, level + 1, CycleType::V, ec, rc, wc);
        break;
      case CycleType::W:
        mg_cycle(h, cfg, level + 1, CycleType::W, ec, rc, wc);
        mg_cycle(h, cfg, level + 1, CycleType::W, ec, rc, wc);
        break;
      case CycleType::F:
        mg_cycle(h, cfg, level + 1, CycleType::F, ec, rc, wc);
        mg_cycle(h, cfg, level + 1, CycleType::V, ec, rc, wc);
        break;
    }
  }

  for (index_t i = 0; i < l.P.n_rows; ++i) {
    double s = 0.0;
    for (index_t k = l.P.row_offsets[i]; k < l.P.row_offsets[i + 1]; ++k)
      s += l.P.values[k] * ec[l.P.col_indices[k]];
    x[i] += s;
  }
  wc.add(static_cast<double>(l.P.nnz()));

  chebyshev_smooth_into(l.A, l.inv_diag, bounds_for(l, cfg.post_spectrum_fraction),
                        cfg.post_cheby_order, x, b, &wc);
}

}  // namespace cycle_detail

/// Applies the AMG preconditioner: precond_iters cycles of cfg.cycle starting
/// from zero, approximating A^{-1} r.
inline DenseVector apply_preconditioner(const AmgHierarchy& h, const SolverConfig& cfg,
                                        const DenseVector& r, WorkCounter& wc) {
  DenseVector x(r.size(), 0.0);
  for (int it = 0; it < cfg.precond_iters; ++it)
    cycle_detail::mg_cycle(h, cfg, 0, cfg.cycle, x, r, wc);
  return x;
}

inline DenseVector apply_preconditioner(const AmgHierarchy& h, const SolverConfig& cfg,
                                        const DenseVector& r) {
  WorkCounter wc;
  return apply_preconditioner(h, cfg, r, wc);
}

}  // namespace solvertune
