#pragma once

// Desk-scale reproductions of the methodological studies: F_alpha
// reliability vs validation size, data balancing, the NN pre-filter effect,
// mutation-ratio and alpha sweeps. Shared by the bench CLI and the
// acceptance suite.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "solvertune/dataset.hpp"
#include "solvertune/es.hpp"
#include "solvertune/evaluator.hpp"
#include "solvertune/metrics.hpp"
#include "solvertune/mlp.hpp"
#include "solvertune/problems.hpp"

namespace solvertune {

struct TrialStats {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

inline TrialStats summarize(std::vector<double> values) {
  TrialStats s;
  s.values = std::move(values);
  if (s.values.empty()) return s;
  for (double v : s.values) s.mean += v;
  s.mean /= static_cast<double>(s.values.size());
  if (s.values.size() > 1) {
    double var = 0.0;
    for (double v : s.values) var += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(var / static_cast<double>(s.values.size() - 1));
  }
  return s;
}

// ---------------------------------------------------------------------------
// F_alpha reliability vs validation dataset size (synthetic noisy ranking)

struct FAlphaVsNvRow {
  std::size_t n_v = 0;
  double mean_f = 0.0;
  double stddev_f = 0.0;
};

inline std::vector<FAlphaVsNvRow> f_alpha_vs_nv_experiment(
    std::uint64_t seed, double alpha = 0.05,
    const std::vector<std::size_t>& sizes = {100, 200, 500, 1000, 2000}, int splits = 5,
    std::size_t total = 10000, double noise = 0.35) {
  Rng rng(seed);
  std::vector<double> truth(total), pred(total);
  for (std::size_t i = 0; i < total; ++i) {
    truth[i] = rng.real01();
    pred[i] = truth[i] + rng.real(-noise, noise);
  }
  std::vector<FAlphaVsNvRow> rows;
  for (std::size_t n_v : sizes) {
    std::vector<double> fs;
    for (int s = 0; s < splits; ++s) {
      Rng split_rng(splitmix64(seed ^ (0xF00Du + 31 * s)));
      std::vector<std::size_t> order(total);
      for (std::size_t i = 0; i < total; ++i) order[i] = i;
      split_rng.shuffle(order);
      std::vector<double> t, p;
      t.reserve(n_v);
      p.reserve(n_v);
      for (std::size_t i = 0; i < n_v; ++i) {
        t.push_back(truth[order[i]]);
        p.push_back(pred[order[i]]);
      }
      fs.push_back(f_alpha(t, p, alpha));
    }
    TrialStats st = summarize(std::move(fs));
    rows.push_back({n_v, st.mean, st.stddev});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Data balancing effect on a deliberately heavy-tailed synthetic landscape

struct BalancingResult {
  std::size_t n_train = 0, n_val = 0;
  double f_unbalanced = 0.0, r2_unbalanced = 0.0;
  double f_balanced = 0.0, r2_balanced = 0.0;
  double f_improvement_percent = 0.0;
};

/// Smooth small-value landscape over about 80% of the space, a 100x tail on
/// the rest, a sliver of outright failures. The argument is a normalized
/// coordinate vector of dimension >= 7.
inline double heavy_tailed_landscape(const std::vector<double>& x) {
  const double tail = x[1] + x[4];
  if (tail > 1.8) return std::numeric_limits<double>::infinity();
  if (tail > 1.37) return 2.0 + 3.0 * x[0];
  return 0.01 + 0.012 * (0.8 * x[0] + 0.6 * x[1] * x[1] + 0.4 * x[2] * x[3] +
                         0.3 * std::fabs(x[4] - 0.5) + 0.2 * x[5] + 0.1 * x[6]);
}

inline Dataset synthetic_heavy_tailed_dataset(const SearchSpace& space, std::size_t n,
                                              std::uint64_t seed) {
  Dataset d;
  d.space_fingerprint = space.fingerprint();
  d.dims = space.dims();
  d.stage = DatasetStage::raw;
  d.seed = seed;
  d.problem = "synthetic:heavy-tail";
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    FitnessSample s;
    s.vector = random_vector(space, rng);
    s.value = heavy_tailed_landscape(normalize(space, s.vector));
    s.converged = std::isfinite(s.value);
    d.samples.push_back(std::move(s));
  }
  return d;
}

inline BalancingResult balancing_experiment(const SearchSpace& space, std::uint64_t seed,
                                            std::size_t n_samples = 1600,
                                            double validation_fraction = 0.2) {
  Dataset raw = synthetic_heavy_tailed_dataset(space, n_samples, seed);
  Rng split_rng(splitmix64(seed ^ 0x5EEDu));
  auto [train_raw, val_raw] = split(raw, validation_fraction, split_rng);
  Dataset train_unbalanced = make_unbalanced(train_raw);
  Dataset train_balanced = balance(train_raw);
  // rank quality is judged against the same clipped validation targets; the
  // bottom-alpha set is identical in every stage
  Dataset val = balance(val_raw);

  TrainConfig cfg;
  cfg.seed = splitmix64(seed ^ 0x7EA1u);
  MlpModel unbal = train_mlp(space, train_unbalanced, cfg);
  MlpModel bal = train_mlp(space, train_balanced, cfg);
  PredictionMetrics mu = evaluate_model(unbal, space, val);
  PredictionMetrics mb = evaluate_model(bal, space, val);

  BalancingResult r;
  r.n_train = train_raw.size();
  r.n_val = val.size();
  r.f_unbalanced = mu.f_alpha.at(0.05);
  r.r2_unbalanced = mu.r_squared;
  r.f_balanced = mb.f_alpha.at(0.05);
  r.r2_balanced = mb.r_squared;
  r.f_improvement_percent =
      r.f_unbalanced > 0.0 ? 100.0 * (r.f_balanced - r.f_unbalanced) / r.f_unbalanced
                           : std::numeric_limits<double>::infinity();
  return r;
}

// ---------------------------------------------------------------------------
// Solver-backed experiments share one problem + dataset + trained surrogate.

struct Testbed {
  std::unique_ptr<Problem> problem;
  SearchSpace space;
  std::unique_ptr<Evaluator> evaluator;
  Dataset raw;
  Dataset balanced;
  std::shared_ptr<const MlpModel> model;
  PredictionMetrics model_metrics;
};

/// Samples a work-units dataset, balances it, trains the surrogate on a
/// 90/10 split and reports its validation metrics.
inline Testbed make_testbed(const std::string& problem_spec, SearchSpace space,
                            std::size_t n_samples, std::uint64_t seed, int jobs = 1) {
  Testbed t;
  t.problem = std::make_unique<Problem>(build_problem(problem_spec));
  t.space = std::move(space);
  t.evaluator = std::make_unique<Evaluator>(*t.problem, t.space, EvalBudget{});
  t.raw = sample_dataset(*t.evaluator, n_samples, seed, {}, jobs);
  t.balanced = balance(t.raw);
  Rng split_rng(splitmix64(seed ^ 0xBEEFu));
  auto [train, val] = split(t.balanced, 0.1, split_rng);
  TrainConfig cfg;
  cfg.seed = splitmix64(seed ^ 0xCAFEu);
  auto model = std::make_shared<MlpModel>(train_mlp(t.space, train, cfg));
  t.model_metrics = evaluate_model(*model, t.space, val);
  t.model = std::move(model);
  return t;
}

/// Repeated seeded HES runs; returns the optimized fitness per trial.
inline TrialStats hes_trials(Testbed& bed, EsConfig cfg, int trials, std::uint64_t seed_base) {
  std::vector<double> best;
  best.reserve(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    cfg.seed = splitmix64(seed_base + static_cast<std::uint64_t>(t));
    TuneResult r = run_hes(*bed.evaluator, cfg);
    best.push_back(r.best_fitness.value);
  }
  return summarize(std::move(best));
}

struct FilterComparison {
  TrialStats with_filter;
  TrialStats without_filter;
};

/// The Fig.5-style comparison: identical ES settings, the random mutation
/// operator with and without the surrogate pre-filter.
inline FilterComparison nn_filter_experiment(Testbed& bed, int trials = 20,
                                             std::uint64_t seed_base = 1000, int lambda_s = 5,
                                             int lambda_r = 10, double alpha = 0.05,
                                             int trial_pool = 5000) {
  EsConfig with;
  with.lambda_s = lambda_s;
  with.lambda_r = lambda_r;
  with.alpha = alpha;
  with.trial_pool = trial_pool;
  with.use_nn_filter = true;
  with.model = bed.model;
  with.inject_default = false;
  EsConfig without = with;
  without.use_nn_filter = false;
  without.model.reset();

  FilterComparison fc;
  fc.with_filter = hes_trials(bed, with, trials, seed_base);
  fc.without_filter = hes_trials(bed, without, trials, seed_base);
  return fc;
}

struct AlphaSweepRow {
  double alpha = 0.0;  // 0 encodes the no-filter baseline
  TrialStats stats;
};

inline std::vector<AlphaSweepRow> alpha_sweep_experiment(
    Testbed& bed, const std::vector<double>& alphas = {0.002, 0.01, 0.05, 0.2}, int trials = 20,
    std::uint64_t seed_base = 2000, bool include_baseline = true, int trial_pool = 5000) {
  std::vector<AlphaSweepRow> rows;
  for (double alpha : alphas) {
    EsConfig cfg;
    cfg.lambda_s = 5;
    cfg.lambda_r = 5;
    cfg.alpha = alpha;
    cfg.trial_pool = trial_pool;
    cfg.use_nn_filter = true;
    cfg.model = bed.model;
    cfg.inject_default = false;
    rows.push_back({alpha, hes_trials(bed, cfg, trials, seed_base)});
  }
  if (include_baseline) {
    EsConfig cfg;
    cfg.lambda_s = 5;
    cfg.lambda_r = 5;
    cfg.inject_default = false;
    rows.push_back({0.0, hes_trials(bed, cfg, trials, seed_base)});
  }
  return rows;
}

struct MutationRatioRow {
  int lambda_s = 0;
  int lambda_r = 0;
  TrialStats stats;
  double mean_evaluations = 0.0;
};

inline std::vector<MutationRatioRow> mutation_ratio_experiment(Testbed& bed, int trials = 10,
                                                               std::uint64_t seed_base = 3000,
                                                               double alpha = 0.05,
                                                               int trial_pool = 5000) {
  const std::vector<std::pair<int, int>> ratios{{5, 5}, {5, 10}, {10, 5}, {10, 10}};
  std::vector<MutationRatioRow> rows;
  for (auto [ls, lr] : ratios) {
    EsConfig cfg;
    cfg.lambda_s = ls;
    cfg.lambda_r = lr;
    cfg.alpha = alpha;
    cfg.trial_pool = trial_pool;
    cfg.use_nn_filter = true;
    cfg.model = bed.model;
    cfg.inject_default = false;
    std::vector<double> best;
    double evals = 0.0;
    for (int t = 0; t < trials; ++t) {
      cfg.seed = splitmix64(seed_base + static_cast<std::uint64_t>(t) + 17u * ls + 3u * lr);
      TuneResult r = run_hes(*bed.evaluator, cfg);
      best.push_back(r.best_fitness.value);
      evals += static_cast<double>(r.trace.total_evaluations);
    }
    MutationRatioRow row;
    row.lambda_s = ls;
    row.lambda_r = lr;
    row.stats = summarize(std::move(best));
    row.mean_evaluations = evals / static_cast<double>(trials);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration: the brute-force oracle for small spaces.

struct ExhaustiveResult {
  ParameterVector best_vector;
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<std::pair<ParameterVector, double>> all;
};

inline ExhaustiveResult exhaustive_search(Evaluator& ev, std::size_t limit = 100000) {
  const SearchSpace& space = ev.space();
  big_uint card = cardinality(space);
  if (card > limit)
    throw ConfigError("space too large for exhaustive search: " + card.str());
  ExhaustiveResult res;
  ParameterVector v;
  v.indices.assign(space.dims(), 0);
  while (true) {
    FitnessResult f = ev.evaluate(v);
    res.all.emplace_back(v, f.value);
    if (f.value < res.best_value) {
      res.best_value = f.value;
      res.best_vector = v;
    }
    std::size_t j = 0;
    while (j < space.dims() &&
           ++v.indices[j] == static_cast<int>(space.specs[j].size()))
      v.indices[j++] = 0;
    if (j == space.dims()) break;
    if (space.dims() == 0) break;
  }
  return res;
}

}  // namespace solvertune
