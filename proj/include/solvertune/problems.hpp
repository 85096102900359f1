#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "solvertune/csr_matrix.hpp"
#include "solvertune/errors.hpp"
#include "solvertune/matrix_market.hpp"
#include "solvertune/rng.hpp"

namespace solvertune {

enum class ProblemKind { cube, jumps, matrix_market };
enum class RhsKind { ones, divergence_free_random, file };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::cube;
  index_t grid_n = 0;         // cube/jumps
  std::string path;           // matrix_market
  RhsKind rhs = RhsKind::ones;
  std::string rhs_path;       // rhs == file
  std::uint64_t rhs_seed = 0; // rhs == divergence_free_random
  std::string text;           // original spec string, for reports
};

/// Parses "cube:N", "jumps:N", "mm:path".
inline ProblemSpec parse_problem_spec(const std::string& s) {
  ProblemSpec spec;
  spec.text = s;
  auto colon = s.find(':');
  if (colon == std::string::npos)
    throw ConfigError("bad problem spec '" + s + "' (expected cube:N, jumps:N or mm:path)");
  const std::string head = s.substr(0, colon);
  const std::string tail = s.substr(colon + 1);
  if (head == "mm") {
    spec.kind = ProblemKind::matrix_market;
    spec.path = tail;
    if (tail.empty()) throw ConfigError("bad problem spec '" + s + "': empty path");
    return spec;
  }
  if (head != "cube" && head != "jumps")
    throw ConfigError("bad problem spec '" + s + "' (unknown kind '" + head + "')");
  spec.kind = head == "cube" ? ProblemKind::cube : ProblemKind::jumps;
  try {
    std::size_t pos = 0;
    spec.grid_n = std::stoll(tail, &pos);
    if (pos != tail.size()) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw ConfigError("bad problem spec '" + s + "': grid size '" + tail + "' is not an integer");
  }
  if (spec.kind == ProblemKind::cube && spec.grid_n < 2)
    throw ConfigError("cube grid must be >= 2, got " + std::to_string(spec.grid_n));
  if (spec.kind == ProblemKind::jumps && spec.grid_n < 10)
    throw ConfigError("jumps grid must be >= 10 so the corner cubes contain a cell, got " +
                      std::to_string(spec.grid_n));
  return spec;
}

namespace detail {

inline void check_grid_size(index_t g) {
  // Sizing guard before any allocation: 7-point stencil storage for g^3 rows.
  if (g > 1024 || g * g * g > (index_t(1) << 28))
    throw ConfigError("grid " + std::to_string(g) + "^3 is too large to address");
}

/// Diffusion coefficient of the jumps problem; regions checked in the order
/// written, so shared boundaries belong to the earlier rule.
inline double jumps_coefficient(double x, double y, double z) {
  auto inside = [](double c, double lo, double hi) { return c >= lo && c <= hi; };
  if (inside(x, 0.1, 0.9) && inside(y, 0.1, 0.9) && inside(z, 0.1, 0.9)) return 1000.0;
  auto corner = [&](double c) { return inside(c, 0.0, 0.1) || inside(c, 0.9, 1.0); };
  if (corner(x) && corner(y) && corner(z)) return 0.1;
  return 1.0;
}

}  // namespace detail

/// 7-point Laplacian on a g^3 grid, Dirichlet boundaries eliminated, unit
/// stencil scaling (diagonal 6, off-diagonals -1). RHS is all ones.
inline std::pair<CsrMatrix, DenseVector> build_cube(index_t g) {
  if (g < 2) throw ConfigError("cube grid must be >= 2");
  detail::check_grid_size(g);
  const index_t n = g * g * g;
  CsrMatrix a(n, n);
  a.col_indices.reserve(static_cast<std::size_t>(n) * 7);
  a.values.reserve(static_cast<std::size_t>(n) * 7);
  auto idx = [g](index_t i, index_t j, index_t k) { return i + g * (j + g * k); };
  for (index_t k = 0; k < g; ++k)
    for (index_t j = 0; j < g; ++j)
      for (index_t i = 0; i < g; ++i) {
        const index_t row = idx(i, j, k);
        auto push = [&](index_t c, double v) {
          a.col_indices.push_back(c);
          a.values.push_back(v);
        };
        if (k > 0) push(idx(i, j, k - 1), -1.0);
        if (j > 0) push(idx(i, j - 1, k), -1.0);
        if (i > 0) push(idx(i - 1, j, k), -1.0);
        push(row, 6.0);
        if (i + 1 < g) push(idx(i + 1, j, k), -1.0);
        if (j + 1 < g) push(idx(i, j + 1, k), -1.0);
        if (k + 1 < g) push(idx(i, j, k + 1), -1.0);
        a.row_offsets[row + 1] = static_cast<index_t>(a.col_indices.size());
      }
  return {std::move(a), DenseVector(static_cast<std::size_t>(n), 1.0)};
}

/// 7-point flux discretization of -div(K grad u) with the stepwise K of the
/// jumps problem, sampled at cell centers; face transmissibility is the
/// harmonic mean of the adjacent cells (boundary faces use the cell's own K).
/// Unit stencil scaling, Dirichlet boundaries, RHS all ones.
inline std::pair<CsrMatrix, DenseVector> build_jumps(index_t g) {
  if (g < 10) throw ConfigError("jumps grid must be >= 10");
  detail::check_grid_size(g);
  const index_t n = g * g * g;
  std::vector<double> coef(static_cast<std::size_t>(n));
  auto idx = [g](index_t i, index_t j, index_t k) { return i + g * (j + g * k); };
  auto center = [g](index_t c) { return (static_cast<double>(c) + 0.5) / static_cast<double>(g); };
  for (index_t k = 0; k < g; ++k)
    for (index_t j = 0; j < g; ++j)
      for (index_t i = 0; i < g; ++i)
        coef[idx(i, j, k)] = detail::jumps_coefficient(center(i), center(j), center(k));
  auto harmonic = [](double a, double b) { return 2.0 * a * b / (a + b); };

  CsrMatrix a(n, n);
  a.col_indices.reserve(static_cast<std::size_t>(n) * 7);
  a.values.reserve(static_cast<std::size_t>(n) * 7);
  for (index_t k = 0; k < g; ++k)
    for (index_t j = 0; j < g; ++j)
      for (index_t i = 0; i < g; ++i) {
        const index_t row = idx(i, j, k);
        const double kc = coef[row];
        double diag = 0.0;
        struct Entry {
          index_t col;
          double val;
        };
        Entry lower[3];
        Entry upper[3];
        int nl = 0, nu = 0;
        auto face = [&](bool in_bounds, index_t neighbor, Entry* side, int& count) {
          if (in_bounds) {
            const double t = harmonic(kc, coef[neighbor]);
            side[count++] = {neighbor, -t};
            diag += t;
          } else {
            diag += kc;  // Dirichlet wall: ghost cell with the same coefficient
          }
        };
        face(k > 0, idx(i, j, k - 1), lower, nl);
        face(j > 0, idx(i, j - 1, k), lower, nl);
        face(i > 0, idx(i - 1, j, k), lower, nl);
        face(i + 1 < g, idx(i + 1, j, k), upper, nu);
        face(j + 1 < g, idx(i, j + 1, k), upper, nu);
        face(k + 1 < g, idx(i, j, k + 1), upper, nu);
        for (int e = 0; e < nl; ++e) {
          a.col_indices.push_back(lower[e].col);
          a.values.push_back(lower[e].val);
        }
        a.col_indices.push_back(row);
        a.values.push_back(diag);
        for (int e = 0; e < nu; ++e) {
          a.col_indices.push_back(upper[e].col);
          a.values.push_back(upper[e].val);
        }
        a.row_offsets[row + 1] = static_cast<index_t>(a.col_indices.size());
      }
  return {std::move(a), DenseVector(static_cast<std::size_t>(n), 1.0)};
}

struct Problem {
  std::string name;
  CsrMatrix A;
  DenseVector b;
};

/// RHS as the discrete divergence of a seeded random cell velocity field
/// (only meaningful for the generated grid problems).
inline DenseVector divergence_free_random_rhs(index_t g, std::uint64_t seed) {
  const index_t n = g * g * g;
  Rng rng(splitmix64(seed ^ 0xD1FFu));
  std::vector<double> u(n), v(n), w(n);
  for (index_t i = 0; i < n; ++i) u[i] = rng.real(-1.0, 1.0);
  for (index_t i = 0; i < n; ++i) v[i] = rng.real(-1.0, 1.0);
  for (index_t i = 0; i < n; ++i) w[i] = rng.real(-1.0, 1.0);
  auto idx = [g](index_t i, index_t j, index_t k) { return i + g * (j + g * k); };
  DenseVector b(static_cast<std::size_t>(n));
  auto diff = [](const std::vector<double>& f, index_t plus, index_t minus, double span) {
    return (f[plus] - f[minus]) / span;
  };
  for (index_t k = 0; k < g; ++k)
    for (index_t j = 0; j < g; ++j)
      for (index_t i = 0; i < g; ++i) {
        const index_t c = idx(i, j, k);
        double s = 0.0;
        s += diff(u, idx(std::min(i + 1, g - 1), j, k), idx(std::max<index_t>(i - 1, 0), j, k),
                  i > 0 && i + 1 < g ? 2.0 : 1.0);
        s += diff(v, idx(i, std::min(j + 1, g - 1), k), idx(i, std::max<index_t>(j - 1, 0), k),
                  j > 0 && j + 1 < g ? 2.0 : 1.0);
        s += diff(w, idx(i, j, std::min(k + 1, g - 1)), idx(i, j, std::max<index_t>(k - 1, 0)),
                  k > 0 && k + 1 < g ? 2.0 : 1.0);
        b[c] = s;
      }
  return b;
}

inline Problem build_problem(const ProblemSpec& spec) {
  Problem p;
  p.name = spec.text.empty() ? "problem" : spec.text;
  switch (spec.kind) {
    case ProblemKind::cube:
      std::tie(p.A, p.b) = build_cube(spec.grid_n);
      break;
    case ProblemKind::jumps:
      std::tie(p.A, p.b) = build_jumps(spec.grid_n);
      break;
    case ProblemKind::matrix_market:
      p.A = parse_matrix_market(spec.path);
      if (p.A.n_rows != p.A.n_cols)
        throw ConfigError("matrix " + spec.path + " is not square");
      p.b.assign(static_cast<std::size_t>(p.A.n_rows), 1.0);
      break;
  }
  switch (spec.rhs) {
    case RhsKind::ones:
      break;  // generators already default to ones
    case RhsKind::divergence_free_random:
      if (spec.kind == ProblemKind::matrix_market)
        throw ConfigError("divergence-free random RHS requires a generated grid problem");
      p.b = divergence_free_random_rhs(spec.grid_n, spec.rhs_seed);
      break;
    case RhsKind::file:
      p.b = read_vector_mm(spec.rhs_path);
      if (static_cast<index_t>(p.b.size()) != p.A.n_rows)
        throw ConfigError("rhs file " + spec.rhs_path + " length " +
                          std::to_string(p.b.size()) + " does not match matrix size " +
                          std::to_string(p.A.n_rows));
      break;
  }
  return p;
}

inline Problem build_problem(const std::string& spec_string) {
  return build_problem(parse_problem_spec(spec_string));
}

}  // namespace solvertune
