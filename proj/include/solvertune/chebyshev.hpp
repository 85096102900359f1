#pragma once

#include <cmath>
#include <string>

#include "solvertune/csr_matrix.hpp"
#include "solvertune/errors.hpp"

namespace solvertune {

/// Accumulates the deterministic cost model: every matrix-vector-like
/// operation contributes the nnz of the operator it applies.
struct WorkCounter {
  double units = 0.0;
  long coarse_solves = 0;
  void add(double u) { units += u; }
};

struct ChebyshevBounds {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

/// In-place Chebyshev polynomial smoothing of degree `order` for A x = b on
/// the diagonally scaled operator D^{-1}A, targeting [lambda_min, lambda_max].
/// Three-term recurrence, `order` matrix-vector products, deterministic.
inline void chebyshev_smooth_into(const CsrMatrix& a, const DenseVector& inv_diag,
                                  ChebyshevBounds bounds, int order, DenseVector& x,
                                  const DenseVector& b, WorkCounter* wc = nullptr) {
  if (order < 1) throw ConfigError("chebyshev order must be >= 1");
  if (bounds.lambda_max <= 0.0)
    throw SolverSetupError("chebyshev bounds invalid: lambda_max = " +
                           std::to_string(bounds.lambda_max) + " (operator not SPD-scaled)");
  if (!(bounds.lambda_min > 0.0) || bounds.lambda_min >= bounds.lambda_max)
    throw SolverSetupError("chebyshev bounds invalid: [" + std::to_string(bounds.lambda_min) +
                           ", " + std::to_string(bounds.lambda_max) + "]");
  const std::size_t n = x.size();
  check_dim(b.size() == n && static_cast<index_t>(n) == a.n_rows, "chebyshev_smooth");

  const double theta = 0.5 * (bounds.lambda_max + bounds.lambda_min);
  const double delta = 0.5 * (bounds.lambda_max - bounds.lambda_min);
  const double sigma = theta / delta;
  double rho = 1.0 / sigma;

  DenseVector z(n), d(n), t(n);
  spmv_into(a, x, t);
  if (wc) wc->add(static_cast<double>(a.nnz()));
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * (b[i] - t[i]);
  for (std::size_t i = 0; i < n; ++i) d[i] = z[i] / theta;
  for (int k = 1;; ++k) {
    for (std::size_t i = 0; i < n; ++i) x[i] += d[i];
    if (k == order) break;
    spmv_into(a, d, t);
    if (wc) wc->add(static_cast<double>(a.nnz()));
    for (std::size_t i = 0; i < n; ++i) z[i] -= inv_diag[i] * t[i];
    const double rho_next = 1.0 / (2.0 * sigma - rho);
    const double c1 = rho_next * rho;
    const double c2 = 2.0 * rho_next / delta;
    for (std::size_t i = 0; i < n; ++i) d[i] = c1 * d[i] + c2 * z[i];
    rho = rho_next;
  }
}

/// Convenience wrapper returning the smoothed iterate.
inline DenseVector chebyshev_smooth(const CsrMatrix& a, const DenseVector& inv_diag,
                                    ChebyshevBounds bounds, int order, const DenseVector& x0,
                                    const DenseVector& b, WorkCounter* wc = nullptr) {
  DenseVector x = x0;
  chebyshev_smooth_into(a, inv_diag, bounds, order, x, b, wc);
  return x;
}

}  // namespace solvertune
