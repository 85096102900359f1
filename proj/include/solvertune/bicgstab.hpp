#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>

#include "solvertune/amg_cycle.hpp"
#include "solvertune/amg_hierarchy.hpp"
#include "solvertune/csr_matrix.hpp"

namespace solvertune {

struct SolveOutcome {
  bool converged = false;
  int iterations = 0;
  double final_relative_residual = std::numeric_limits<double>::infinity();
  double wall_time = 0.0;   // seconds, solve only
  double setup_time = 0.0;  // seconds, hierarchy build
  double work_units = 0.0;  // deterministic cost model
  std::string failure;      // empty when converged
};

struct SolveLimits {
  int max_outer_iters = -1;   // <0: use cfg.outer_max_iters
  double work_cap = 0.0;      // 0: none
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

constexpr double kBreakdownTol = 1e-30;

/// Right-preconditioned BiCGStab. Stops on ||r|| <= tol*||b||, iteration
/// budget, breakdown scalars below 1e-30, NaN/Inf in the iterates, work cap
/// or deadline; all non-success paths land in outcome.failure.
inline SolveOutcome bicgstab_solve(const CsrMatrix& a, const DenseVector& b,
                                   const AmgHierarchy& h, const SolverConfig& cfg,
                                   DenseVector& x, const SolveLimits& lim = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  SolveOutcome out;
  WorkCounter wc;
  const std::size_t n = b.size();
  check_dim(static_cast<index_t>(n) == a.n_rows, "bicgstab");
  x.assign(n, 0.0);

  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    out.converged = true;
    out.final_relative_residual = 0.0;
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }
  const double tol_abs = cfg.outer_rel_tol * bnorm;
  const int max_iters = lim.max_outer_iters >= 0 ? lim.max_outer_iters : cfg.outer_max_iters;

  DenseVector r = b;  // x0 = 0
  DenseVector r_hat = r;
  DenseVector p(n, 0.0), v(n, 0.0), s(n), t(n);
  double rho = 1.0, alpha = 1.0, omega = 1.0;

  auto fail = [&](const std::string& why) {
    out.converged = false;
    out.failure = why;
  };
  auto finish = [&] {
    // explicit residual recomputation backs the convergence contract
    spmv_into(a, x, t);
    wc.add(static_cast<double>(a.nnz()));
    double rr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = b[i] - t[i];
      rr += d * d;
    }
    out.final_relative_residual = std::sqrt(rr) / bnorm;
    out.work_units = wc.units;
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  int i = 0;
  bool done = false;
  for (; i < max_iters && !done; ) {
    ++i;
    if (lim.work_cap > 0.0 && wc.units > lim.work_cap) {
      --i;
      fail("work cap exceeded");
      break;
    }
    if (lim.deadline && std::chrono::steady_clock::now() > *lim.deadline) {
      --i;
      fail("timeout");
      break;
    }
    const double rho_new = dot(r_hat, r);
    if (std::fabs(rho_new) < kBreakdownTol) {
      fail("breakdown: rho");
      break;
    }
    const double beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    for (std::size_t j = 0; j < n; ++j) p[j] = r[j] + beta * (p[j] - omega * v[j]);

    DenseVector y = apply_preconditioner(h, cfg, p, wc);
    spmv_into(a, y, v);
    wc.add(static_cast<double>(a.nnz()));
    const double rhv = dot(r_hat, v);
    if (std::fabs(rhv) < kBreakdownTol) {
      fail("breakdown: r_hat.v");
      break;
    }
    alpha = rho_new / rhv;
    for (std::size_t j = 0; j < n; ++j) s[j] = r[j] - alpha * v[j];
    axpy_into(alpha, y, x);

    double snorm = norm2(s);
    if (!std::isfinite(snorm)) {
      fail("non-finite iterate");
      break;
    }
    if (snorm <= tol_abs) {
      r = s;
      out.converged = true;
      done = true;
      break;
    }

    DenseVector z = apply_preconditioner(h, cfg, s, wc);
    spmv_into(a, z, t);
    wc.add(static_cast<double>(a.nnz()));
    const double tt = dot(t, t);
    if (std::fabs(tt) < kBreakdownTol) {
      fail("breakdown: t.t");
      break;
    }
    omega = dot(t, s) / tt;
    if (std::fabs(omega) < kBreakdownTol) {
      fail("breakdown: omega");
      break;
    }
    axpy_into(omega, z, x);
    for (std::size_t j = 0; j < n; ++j) r[j] = s[j] - omega * t[j];

    const double rnorm = norm2(r);
    if (!std::isfinite(rnorm)) {
      fail("non-finite iterate");
      break;
    }
    if (rnorm <= tol_abs) {
      out.converged = true;
      done = true;
    }
  }
  out.iterations = i;
  if (out.converged && lim.work_cap > 0.0 && wc.units > lim.work_cap) {
    out.converged = false;
    out.failure = "work cap exceeded";
  }
  if (!out.converged && out.failure.empty()) out.failure = "iteration budget exhausted";
  finish();
  if (out.converged && !std::isfinite(out.final_relative_residual)) {
    out.converged = false;
    out.failure = "non-finite recomputed residual";
  }
  return out;
}

}  // namespace solvertune
