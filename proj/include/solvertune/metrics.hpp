#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "solvertune/errors.hpp"

namespace solvertune {

inline double mean_squared_error(const std::vector<double>& truth,
                                 const std::vector<double>& pred) {
  if (truth.size() != pred.size() || truth.empty())
    throw ConfigError("mse: size mismatch or empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - pred[i];
    s += d * d;
  }
  return s / static_cast<double>(truth.size());
}

/// Coefficient of determination 1 - SS_R/SS_T. Requires at least two samples
/// and non-constant truth (SS_T > 0).
inline double r_squared(const std::vector<double>& truth, const std::vector<double>& pred) {
  if (truth.size() != pred.size() || truth.size() < 2)
    throw ConfigError("r_squared: needs equal-length inputs with at least 2 samples");
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) /
                      static_cast<double>(truth.size());
  double ss_r = 0.0, ss_t = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double dr = truth[i] - pred[i];
    const double dt = truth[i] - mean;
    ss_r += dr * dr;
    ss_t += dt * dt;
  }
  if (ss_t == 0.0) throw ConfigError("r_squared: truth values are all equal (SS_T = 0)");
  return 1.0 - ss_r / ss_t;
}

namespace metrics_detail {

/// Indices of the n smallest values; ties resolved by index order.
inline std::vector<std::size_t> least_indices(const std::vector<double>& values, std::size_t n) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  idx.resize(n);
  return idx;
}

}  // namespace metrics_detail

/// Ranking quality F_alpha: the fraction of the alpha*N least predicted
/// values that are also among the alpha*N least true values.
inline double f_alpha(const std::vector<double>& truth, const std::vector<double>& pred,
                      double alpha) {
  if (truth.size() != pred.size() || truth.empty())
    throw ConfigError("f_alpha: size mismatch or empty input");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("f_alpha: alpha must be in (0, 1]");
  const std::size_t n_alpha =
      static_cast<std::size_t>(std::floor(alpha * static_cast<double>(truth.size())));
  if (n_alpha == 0)
    throw ConfigError("f_alpha: alpha " + std::to_string(alpha) + " selects zero of " +
                      std::to_string(truth.size()) + " samples");
  const std::vector<std::size_t> least_true = metrics_detail::least_indices(truth, n_alpha);
  const std::vector<std::size_t> least_pred = metrics_detail::least_indices(pred, n_alpha);
  std::vector<char> in_true(truth.size(), 0);
  for (std::size_t i : least_true) in_true[i] = 1;
  std::size_t overlap = 0;
  for (std::size_t i : least_pred) overlap += in_true[i];
  return static_cast<double>(overlap) / static_cast<double>(n_alpha);
}

struct PredictionMetrics {
  double mse = 0.0;
  double r_squared = 0.0;
  std::map<double, double> f_alpha;  // alpha -> F_alpha
};

struct AlphaChoice {
  double alpha = 0.0;
  bool constraint_met = false;  // F_alpha >= 1/lambda_r held for the winner
};

/// Picks alpha maximizing P(alpha) = F_alpha / alpha subject to
/// F_alpha >= 1/lambda_r. With no feasible candidate, falls back to the
/// largest candidate (most permissive filter) with constraint_met = false.
inline AlphaChoice optimal_alpha(const std::vector<double>& truth,
                                 const std::vector<double>& pred,
                                 const std::vector<double>& candidate_alphas, int lambda_r) {
  if (candidate_alphas.empty()) throw ConfigError("optimal_alpha: no candidates");
  if (lambda_r < 1) throw ConfigError("optimal_alpha: lambda_r must be >= 1");
  const double floor_f = 1.0 / static_cast<double>(lambda_r);
  AlphaChoice best{0.0, false};
  double best_p = -1.0;
  double largest = -1.0;
  for (double a : candidate_alphas) {
    largest = std::max(largest, a);
    const std::size_t n_alpha =
        static_cast<std::size_t>(std::floor(a * static_cast<double>(truth.size())));
    if (n_alpha == 0) continue;
    const double f = f_alpha(truth, pred, a);
    if (f < floor_f) continue;
    const double p = f / a;
    if (p > best_p || (p == best_p && a < best.alpha)) {
      best_p = p;
      best = {a, true};
    }
  }
  if (!best.constraint_met) return {largest, false};
  return best;
}

}  // namespace solvertune
