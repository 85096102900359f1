#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "solvertune/amg_cycle.hpp"
#include "solvertune/amg_hierarchy.hpp"
#include "solvertune/bicgstab.hpp"
#include "solvertune/problems.hpp"
#include "solvertune/rng.hpp"

using namespace solvertune;

namespace {

CsrMatrix identity(index_t n) {
  std::vector<Triplet> t;
  for (index_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return CsrMatrix::from_triplets(n, n, t);
}

std::vector<double> to_dense(const CsrMatrix& a) {
  std::vector<double> d(static_cast<std::size_t>(a.n_rows) * a.n_cols, 0.0);
  for (index_t i = 0; i < a.n_rows; ++i)
    for (index_t k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      d[static_cast<std::size_t>(i) * a.n_cols + a.col_indices[k]] = a.values[k];
  return d;
}

/// Dense product with ascending-m accumulation, the same summation order the
/// sparse kernel uses, so results must agree bit for bit.
std::vector<double> dense_mul(const std::vector<double>& l, index_t lr, index_t lc,
                              const std::vector<double>& r, index_t rc) {
  std::vector<double> out(static_cast<std::size_t>(lr) * rc, 0.0);
  for (index_t i = 0; i < lr; ++i)
    for (index_t j = 0; j < rc; ++j) {
      double s = 0.0;
      for (index_t m = 0; m < lc; ++m)
        s += l[static_cast<std::size_t>(i) * lc + m] * r[static_cast<std::size_t>(m) * rc + j];
      out[static_cast<std::size_t>(i) * rc + j] = s;
    }
  return out;
}

double max_abs(const CsrMatrix& a) {
  double m = 0.0;
  for (double v : a.values) m = std::max(m, std::fabs(v));
  return m;
}

double energy_norm(const CsrMatrix& a, const DenseVector& e) {
  return std::sqrt(dot(e, spmv(a, e)));
}

/// Accurate solve via plain CG, used as the fixed-point oracle.
DenseVector cg_solve(const CsrMatrix& a, const DenseVector& b, double tol = 1e-13) {
  const std::size_t n = b.size();
  DenseVector x(n, 0.0), r = b, p = r, ap;
  double rr = dot(r, r);
  for (int k = 0; k < 10000; ++k) {
    spmv_into(a, p, ap);
    const double alpha = rr / dot(p, ap);
    axpy_into(alpha, p, x);
    axpy_into(-alpha, ap, r);
    const double rr_new = dot(r, r);
    if (std::sqrt(rr_new) <= tol * norm2(b)) break;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + (rr_new / rr) * p[i];
    rr = rr_new;
  }
  return x;
}

}  // namespace

TEST_CASE("hierarchy: small matrix collapses to a single level") {
  CsrMatrix a = identity(4);
  AmgHierarchy h = build_hierarchy(a, default_config());
  REQUIRE(h.num_levels() == 1);
  CHECK_FALSE(h.levels[0].has_coarse);
  // degenerate cycle: exact solve of A z = r
  DenseVector r{1.0, -2.0, 3.0, 0.5};
  CHECK(apply_preconditioner(h, default_config(), r) == r);
}

TEST_CASE("hierarchy: cube:16 default shape") {
  auto [a, b] = build_cube(16);
  AmgHierarchy h = build_hierarchy(a, default_config());
  REQUIRE(h.num_levels() == 3);  // 4096 -> 2048 -> 339 with the shipped defaults
  for (std::size_t l = 0; l + 1 < h.num_levels(); ++l) {
    CHECK(h.levels[l].A.n_rows > h.levels[l + 1].A.n_rows);
    CHECK(h.levels[l].has_coarse);
    CHECK(h.levels[l].P.n_cols == h.levels[l + 1].A.n_rows);
    CHECK(h.levels[l].P.n_rows == h.levels[l].A.n_rows);
  }
  CHECK(h.coarsest_size() <= default_config().coarse_matrix_size);
}

TEST_CASE("hierarchy: both coarsenings and interpolations produce valid decreasing levels") {
  auto [a, b] = build_cube(10);
  for (CoarseningType c : {CoarseningType::classical_rs, CoarseningType::pmis_like})
    for (InterpType it : {InterpType::direct, InterpType::classical}) {
      SolverConfig cfg;
      cfg.coarsening = c;
      cfg.interpolation = it;
      cfg.coarse_matrix_size = 40;
      AmgHierarchy h = build_hierarchy(a, cfg);
      CHECK(h.num_levels() >= 2);
      for (std::size_t l = 0; l + 1 < h.num_levels(); ++l) {
        h.levels[l].A.validate();
        h.levels[l].P.validate();
        CHECK(h.levels[l].A.n_rows > h.levels[l + 1].A.n_rows);
      }
      // symmetry is preserved up to roundoff in the triple product
      for (const AmgLevel& l : h.levels)
        CHECK(symmetry_gap(l.A) <= 1e-12 * max_abs(l.A));
    }
}

TEST_CASE("hierarchy: Galerkin operators equal the explicit triple product exactly") {
  auto [a, b] = build_cube(6);
  for (InterpType it : {InterpType::direct, InterpType::classical}) {
    SolverConfig cfg;
    cfg.interpolation = it;
    cfg.coarse_matrix_size = 20;
    AmgHierarchy h = build_hierarchy(a, cfg);
    REQUIRE(h.num_levels() >= 2);
    for (std::size_t l = 0; l + 1 < h.num_levels(); ++l) {
      const CsrMatrix& al = h.levels[l].A;
      const CsrMatrix& p = h.levels[l].P;
      const CsrMatrix& ac = h.levels[l + 1].A;
      CsrMatrix pt = transpose(p);
      std::vector<double> t_dense =
          dense_mul(to_dense(pt), pt.n_rows, pt.n_cols, to_dense(al), al.n_cols);
      std::vector<double> ac_dense =
          dense_mul(t_dense, pt.n_rows, al.n_cols, to_dense(p), p.n_cols);
      double worst = 0.0;
      for (index_t i = 0; i < ac.n_rows; ++i)
        for (index_t j = 0; j < ac.n_cols; ++j)
          worst = std::max(worst, std::fabs(ac_dense[static_cast<std::size_t>(i) * ac.n_cols + j] -
                                            ac.at(i, j)));
      CHECK(worst == 0.0);
    }
  }
}

TEST_CASE("hierarchy: interpolation truncation knobs") {
  auto [a, b] = build_cube(8);
  SolverConfig all;
  all.trunc_factor = 0.0;
  all.p_max_elements = 0;  // 0 means no cap
  all.coarse_matrix_size = 100;
  SolverConfig capped = all;
  capped.p_max_elements = 2;
  AmgHierarchy h_all = build_hierarchy(a, all);
  AmgHierarchy h_capped = build_hierarchy(a, capped);
  REQUIRE(h_all.num_levels() >= 2);
  REQUIRE(h_capped.num_levels() >= 2);
  const CsrMatrix& p_all = h_all.levels[0].P;
  const CsrMatrix& p_capped = h_capped.levels[0].P;
  CHECK(p_all.nnz() > p_capped.nnz());
  index_t longest = 0;
  for (index_t i = 0; i < p_capped.n_rows; ++i)
    longest = std::max(longest, p_capped.row_offsets[i + 1] - p_capped.row_offsets[i]);
  CHECK(longest <= 2);
  index_t longest_all = 0;
  for (index_t i = 0; i < p_all.n_rows; ++i)
    longest_all = std::max(longest_all, p_all.row_offsets[i + 1] - p_all.row_offsets[i]);
  CHECK(longest_all > 2);

  // truncation preserves row sums where a row survives
  SolverConfig trunc = all;
  trunc.trunc_factor = 0.5;
  AmgHierarchy h_trunc = build_hierarchy(a, trunc);
  const CsrMatrix& p0 = h_all.levels[0].P;
  const CsrMatrix& p1 = h_trunc.levels[0].P;
  REQUIRE(p0.n_rows == p1.n_rows);
  for (index_t i = 0; i < p0.n_rows; ++i) {
    double s0 = 0.0, s1 = 0.0;
    for (double v : p0.row_vals(i)) s0 += v;
    for (double v : p1.row_vals(i)) s1 += v;
    if (p1.row_offsets[i + 1] > p1.row_offsets[i])
      CHECK(s1 == Catch::Approx(s0).margin(1e-12));
  }
}

TEST_CASE("hierarchy: structurally singular coarsest operator is reported with its level") {
  CsrMatrix a =
      CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}});
  CHECK_THROWS_WITH(build_hierarchy(a, default_config()),
                    Catch::Matchers::ContainsSubstring("level 0"));
}

TEST_CASE("hierarchy: stalled coarsening beyond the factorization cap fails fast") {
  // the identity has no strong connections at all: everything is an F point,
  // coarsening collapses, and a 2000-row "coarsest" level is refused
  CsrMatrix a = identity(2000);
  CHECK_THROWS_AS(build_hierarchy(a, default_config()), SolverSetupError);
  CsrMatrix small = identity(400);
  AmgHierarchy h = build_hierarchy(small, default_config());
  CHECK(h.num_levels() == 1);
}

TEST_CASE("hierarchy: zero diagonal is a setup error") {
  CsrMatrix a = CsrMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}});
  CHECK_THROWS_AS(build_hierarchy(a, default_config()), SolverSetupError);
}

TEST_CASE("chebyshev: order 1 on the identity reduces the residual by the scalar factor") {
  CsrMatrix a = identity(5);
  DenseVector inv_diag(5, 1.0);
  DenseVector b{1.0, 2.0, 3.0, 4.0, 5.0};
  DenseVector x0(5, 0.0);
  const double eps = 1e-6;
  DenseVector x = chebyshev_smooth(a, inv_diag, {eps, 1.0}, 1, x0, b);
  // residual scaled by exactly |1 - 1/theta| with theta = (1+eps)/2
  const double factor = std::fabs(1.0 - 2.0 / (1.0 + eps));
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(std::fabs(b[i] - x[i]) == Catch::Approx(factor * b[i]).epsilon(1e-9));
  CHECK(norm2(axpy(-1.0, x, b)) < norm2(b));
}

TEST_CASE("chebyshev: exact solution is a fixed point") {
  CsrMatrix a = identity(4);
  DenseVector inv_diag(4, 1.0);
  DenseVector b{2.0, -1.0, 0.5, 0.0};
  for (int order = 1; order <= 4; ++order) {
    DenseVector x = chebyshev_smooth(a, inv_diag, {0.3, 1.2}, order, b, b);
    CHECK(x == b);
  }
  auto [cube, rhs] = build_cube(6);
  AmgHierarchy h = build_hierarchy(cube, default_config());
  DenseVector xstar = cg_solve(cube, rhs);
  DenseVector smoothed = chebyshev_smooth(cube, h.levels[0].inv_diag,
                                          {0.3 * h.levels[0].lambda_max, h.levels[0].lambda_max},
                                          3, xstar, rhs);
  CHECK(norm2(axpy(-1.0, xstar, smoothed)) <= 1e-10 * norm2(xstar));
}

TEST_CASE("chebyshev: energy-norm error never increases on an SPD system") {
  auto [a, b] = build_cube(8);
  AmgHierarchy h = build_hierarchy(a, default_config());
  const DenseVector& inv_diag = h.levels[0].inv_diag;
  const double lmax_true = 1.0 + std::cos(M_PI / 9.0);  // spectrum edge of D^{-1}A on this grid
  CHECK(h.levels[0].lambda_max >= lmax_true);           // estimated bound encloses the spectrum
  DenseVector xstar = cg_solve(a, b);
  Rng rng(2024);
  const std::vector<double> fractions{0.1, 0.3, 0.9};
  for (int trial = 0; trial < 100; ++trial) {
    DenseVector x(b.size());
    for (double& v : x) v = rng.real(-1.0, 1.0);
    const int order = 1 + static_cast<int>(rng.below(4));
    const double fraction = fractions[rng.below(3)];
    DenseVector e0 = axpy(-1.0, xstar, x);
    const double before = energy_norm(a, e0);
    ChebyshevBounds bounds{fraction * h.levels[0].lambda_max, h.levels[0].lambda_max};
    DenseVector smoothed = chebyshev_smooth(a, inv_diag, bounds, order, x, b);
    DenseVector e1 = axpy(-1.0, xstar, smoothed);
    const double after = energy_norm(a, e1);
    CHECK(after <= before * (1.0 + 1e-12));
  }
}

TEST_CASE("chebyshev: invalid bounds and orders are rejected") {
  CsrMatrix a = identity(3);
  DenseVector inv_diag(3, 1.0), x(3, 0.0), b(3, 1.0);
  CHECK_THROWS_AS(chebyshev_smooth(a, inv_diag, {0.1, -1.0}, 2, x, b), SolverSetupError);
  CHECK_THROWS_AS(chebyshev_smooth(a, inv_diag, {0.0, 1.0}, 2, x, b), SolverSetupError);
  CHECK_THROWS_AS(chebyshev_smooth(a, inv_diag, {0.5, 0.4}, 2, x, b), SolverSetupError);
  CHECK_THROWS_AS(chebyshev_smooth(a, inv_diag, {0.1, 1.0}, 0, x, b), ConfigError);
}

TEST_CASE("chebyshev: work accounting counts order matvecs") {
  auto [a, b] = build_cube(4);
  AmgHierarchy h = build_hierarchy(a, default_config());
  for (int order = 1; order <= 4; ++order) {
    WorkCounter wc;
    DenseVector x(b.size(), 0.0);
    chebyshev_smooth_into(a, h.levels[0].inv_diag, {0.3, 1.9}, order, x, b, &wc);
    CHECK(wc.units == static_cast<double>(order) * static_cast<double>(a.nnz()));
  }
}

TEST_CASE("cycles: coarse-solve counts follow the cycle shape") {
  auto [a, b] = build_cube(16);
  SolverConfig cfg;  // 3 levels with the defaults
  AmgHierarchy h = build_hierarchy(a, cfg);
  REQUIRE(h.num_levels() == 3);
  auto count = [&](CycleType t) {
    SolverConfig c = cfg;
    c.cycle = t;
    WorkCounter wc;
    apply_preconditioner(h, c, b, wc);
    return wc.coarse_solves;
  };
  CHECK(count(CycleType::V) == 1);
  CHECK(count(CycleType::W) == 2);
  CHECK(count(CycleType::F) == 2);
}

TEST_CASE("cycles: W work dominates V work; precond_iters scales linearly") {
  auto [a, b] = build_cube(12);
  SolverConfig cfg;
  cfg.coarse_matrix_size = 100;
  AmgHierarchy h = build_hierarchy(a, cfg);
  WorkCounter wv, ww, wf;
  SolverConfig cv = cfg, cw = cfg, cf = cfg;
  cw.cycle = CycleType::W;
  cf.cycle = CycleType::F;
  apply_preconditioner(h, cv, b, wv);
  apply_preconditioner(h, cw, b, ww);
  apply_preconditioner(h, cf, b, wf);
  CHECK(ww.units >= wv.units);
  CHECK(wf.units >= wv.units);
  CHECK(ww.units >= wf.units);

  SolverConfig c2 = cfg;
  c2.precond_iters = 2;
  WorkCounter w1, w2;
  apply_preconditioner(h, cfg, b, w1);
  apply_preconditioner(h, c2, b, w2);
  CHECK(w2.units == 2.0 * w1.units);
}

TEST_CASE("cycles: zero residual maps to zero correction") {
  auto [a, b] = build_cube(8);
  AmgHierarchy h = build_hierarchy(a, default_config());
  DenseVector zero(b.size(), 0.0);
  for (CycleType t : {CycleType::V, CycleType::W, CycleType::F}) {
    SolverConfig c;
    c.cycle = t;
    CHECK(apply_preconditioner(h, c, zero) == zero);
  }
}

TEST_CASE("bicgstab: identity solves in one iteration with zero residual") {
  CsrMatrix a = identity(6);
  DenseVector b{1.0, -2.0, 3.0, 0.0, 0.25, 9.0};
  AmgHierarchy h = build_hierarchy(a, default_config());
  DenseVector x;
  SolveOutcome out = bicgstab_solve(a, b, h, default_config(), x);
  CHECK(out.converged);
  CHECK(out.iterations <= 1);
  CHECK(out.final_relative_residual == 0.0);
  CHECK(x == b);
}

TEST_CASE("bicgstab: zero iteration budget means no convergence, zero iterations") {
  auto [a, b] = build_cube(4);
  SolverConfig cfg;
  cfg.outer_max_iters = 0;
  AmgHierarchy h = build_hierarchy(a, cfg);
  DenseVector x;
  SolveOutcome out = bicgstab_solve(a, b, h, cfg, x);
  CHECK_FALSE(out.converged);
  CHECK(out.iterations == 0);
}

TEST_CASE("bicgstab: zero rhs converges immediately") {
  auto [a, b] = build_cube(4);
  DenseVector zero(b.size(), 0.0);
  AmgHierarchy h = build_hierarchy(a, default_config());
  DenseVector x;
  SolveOutcome out = bicgstab_solve(a, zero, h, default_config(), x);
  CHECK(out.converged);
  CHECK(out.iterations == 0);
  CHECK(out.final_relative_residual == 0.0);
}

TEST_CASE("bicgstab: non-finite rhs is refused gracefully") {
  auto [a, b] = build_cube(4);
  DenseVector bad = b;
  bad[3] = std::numeric_limits<double>::infinity();
  AmgHierarchy h = build_hierarchy(a, default_config());
  DenseVector x;
  SolveOutcome out = bicgstab_solve(a, bad, h, default_config(), x);
  CHECK_FALSE(out.converged);
}

TEST_CASE("bicgstab: cube:20 default config regression") {
  auto [a, b] = build_cube(20);
  SolverConfig cfg;  // tol 1e-8 default
  AmgHierarchy h = build_hierarchy(a, cfg);
  DenseVector x;
  SolveOutcome out = bicgstab_solve(a, b, h, cfg, x);
  REQUIRE(out.converged);
  CHECK(out.iterations == 5);  // pinned regression value
  CHECK(out.final_relative_residual <= 2.0 * cfg.outer_rel_tol);
}

TEST_CASE("bicgstab: convergence contract and determinism across assorted configs") {
  auto [a, b] = build_cube(12);
  std::vector<SolverConfig> configs;
  {
    SolverConfig c;
    configs.push_back(c);
    c.cycle = CycleType::W;
    c.pre_cheby_order = 4;
    c.post_cheby_order = 1;
    configs.push_back(c);
    SolverConfig d;
    d.coarsening = CoarseningType::pmis_like;
    d.interpolation = InterpType::direct;
    d.strength_threshold = 0.5;
    d.trunc_factor = 0.0;
    d.p_max_elements = 0;
    d.precond_iters = 2;
    configs.push_back(d);
    SolverConfig e;
    e.cycle = CycleType::F;
    e.max_row_sum = 0.5;
    e.pre_spectrum_fraction = 0.1;
    e.post_spectrum_fraction = 0.9;
    configs.push_back(e);
  }
  for (const SolverConfig& cfg : configs) {
    AmgHierarchy h = build_hierarchy(a, cfg);
    DenseVector x1, x2;
    SolveOutcome o1 = bicgstab_solve(a, b, h, cfg, x1);
    SolveOutcome o2 = bicgstab_solve(a, b, h, cfg, x2);
    if (o1.converged) {
      CHECK(o1.final_relative_residual <= 2.0 * cfg.outer_rel_tol);
      DenseVector r = axpy(-1.0, spmv(a, x1), b);
      CHECK(norm2(r) / norm2(b) <= 2.0 * cfg.outer_rel_tol);
    }
    CHECK(o1.converged == o2.converged);
    CHECK(o1.iterations == o2.iterations);
    CHECK(o1.work_units == o2.work_units);
    CHECK(o1.final_relative_residual == o2.final_relative_residual);
    CHECK(x1 == x2);
  }
}

TEST_CASE("bicgstab: W-cycle costs at least as much per iteration as V") {
  auto [a, b] = build_cube(10);
  SolverConfig v;
  SolverConfig w;
  w.cycle = CycleType::W;
  AmgHierarchy hv = build_hierarchy(a, v);
  AmgHierarchy hw = build_hierarchy(a, w);
  DenseVector x;
  SolveOutcome ov = bicgstab_solve(a, b, hv, v, x);
  SolveOutcome ow = bicgstab_solve(a, b, hw, w, x);
  REQUIRE(ov.converged);
  REQUIRE(ow.converged);
  CHECK(ow.work_units / static_cast<double>(ow.iterations) >=
        ov.work_units / static_cast<double>(ov.iterations));
}

TEST_CASE("config file round trip and validation") {
  SolverConfig cfg;
  cfg.cycle = CycleType::F;
  cfg.strength_threshold = 0.45;
  cfg.p_max_elements = 7;
  SolverConfig back = SolverConfig::from_text(cfg.to_text());
  CHECK(back == cfg);

  CHECK_THROWS_AS(SolverConfig::from_text("cycle = X\n"), ConfigError);
  CHECK_THROWS_AS(SolverConfig::from_text("no_such_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(SolverConfig::from_text("strength_threshold = 0.95\n"), ConfigError);
  CHECK_THROWS_AS(SolverConfig::from_text("pre_cheby_order = 9\n"), ConfigError);
  SolverConfig partial = SolverConfig::from_text("cycle = W\n# comment\n\n");
  CHECK(partial.cycle == CycleType::W);
  CHECK(partial.precond_iters == default_config().precond_iters);
}
