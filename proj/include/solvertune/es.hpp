#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "solvertune/evaluator.hpp"
#include "solvertune/mlp.hpp"
#include "solvertune/param_space.hpp"

namespace solvertune {

/// (1+lambda)-ES configuration: lambda_s soft mutations, lambda_r random
/// mutations (optionally pre-filtered by the surrogate network).
struct EsConfig {
  int lambda_s = 5;
  int lambda_r = 5;
  double alpha = 0.002;   // least-predicted fraction of the trial pool
  int trial_pool = 5000;  // L
  bool use_nn_filter = false;
  std::shared_ptr<const MlpModel> model;  // present iff use_nn_filter
  int stall_window = 5;
  int max_generations = 50;
  double soft_stay_prob = 0.5;
  bool inject_default = true;  // seed generation 0 with the default config when on-grid
  std::uint64_t seed = 0;

  int lambda() const { return lambda_s + lambda_r; }
  /// L_alpha, the predicted-least pool the random mutations draw from.
  int filtered_pool() const {
    return static_cast<int>(std::ceil(alpha * static_cast<double>(trial_pool)));
  }

  void validate() const {
    if (lambda() < 1) throw ConfigError("es: lambda_s + lambda_r must be >= 1");
    if (lambda_s < 0 || lambda_r < 0) throw ConfigError("es: negative mutation counts");
    if (stall_window < 1 || max_generations < 1)
      throw ConfigError("es: stall window and generation cap must be >= 1");
    if (use_nn_filter != static_cast<bool>(model))
      throw ConfigError("es: model must be present exactly when the NN filter is enabled");
    if (use_nn_filter) {
      if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("es: alpha must be in (0, 1]");
      if (trial_pool < 1) throw ConfigError("es: trial pool must be >= 1");
      if (lambda_r > filtered_pool())
        throw ConfigError("es: lambda_r = " + std::to_string(lambda_r) +
                          " exceeds the filtered pool ceil(alpha*L) = " +
                          std::to_string(filtered_pool()));
    }
  }
};

struct Individual {
  ParameterVector vector;
  FitnessResult fitness;
};

struct Generation {
  int index = 0;
  std::vector<Individual> individuals;  // offsprings evaluated this generation
  Individual best;                      // after plus selection
};

enum class StopReason { stall, max_generations };

inline const char* to_string(StopReason r) {
  return r == StopReason::stall ? "stall" : "max_generations";
}

struct OptimizationTrace {
  std::vector<Generation> generations;
  long total_evaluations = 0;  // distinct vectors evaluated during this run
  StopReason stop_reason = StopReason::stall;
  double elapsed_seconds = 0.0;

  std::vector<double> best_history() const {
    std::vector<double> h;
    h.reserve(generations.size());
    for (const Generation& g : generations) h.push_back(g.best.fitness.value);
    return h;
  }
};

struct TuneResult {
  SolverConfig best_config;
  ParameterVector best_vector;
  FitnessResult best_fitness;
  OptimizationTrace trace;
};

/// Raised when no individual converges within the retry budget.
struct NoFeasibleConfig : std::runtime_error {
  OptimizationTrace trace;
  explicit NoFeasibleConfig(OptimizationTrace t)
      : std::runtime_error("no feasible configuration found: every evaluated individual failed"),
        trace(std::move(t)) {}
};

/// Soft mutation operator M_S applied to a cloned parent.
inline ParameterVector soft_offspring(const SearchSpace& space, const ParameterVector& parent,
                                      Rng& rng, double stay_prob = 0.5) {
  return soft_mutate(space, parent, rng, MutationProbs{stay_prob});
}

/// Random mutation operator M_R: lambda_r fresh vectors, drawn uniformly or,
/// with the NN filter, sampled without replacement from the ceil(alpha*L)
/// least-predicted of an L-vector trial pool.
inline std::vector<ParameterVector> random_mutation(const SearchSpace& space, const EsConfig& cfg,
                                                    Rng& rng) {
  std::vector<ParameterVector> out;
  out.reserve(static_cast<std::size_t>(cfg.lambda_r));
  if (!cfg.use_nn_filter) {
    for (int k = 0; k < cfg.lambda_r; ++k) out.push_back(random_vector(space, rng));
    return out;
  }
  std::vector<ParameterVector> pool;
  pool.reserve(static_cast<std::size_t>(cfg.trial_pool));
  for (int k = 0; k < cfg.trial_pool; ++k) pool.push_back(random_vector(space, rng));
  const std::vector<double> predicted = predict(*cfg.model, space, pool);
  std::vector<std::size_t> idx(pool.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return predicted[a] < predicted[b]; });
  const std::size_t pool_size = static_cast<std::size_t>(cfg.filtered_pool());
  std::vector<std::size_t> candidates(idx.begin(), idx.begin() + pool_size);
  // partial Fisher-Yates: lambda_r draws without replacement
  for (int k = 0; k < cfg.lambda_r; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(candidates.size() - k));
    std::swap(candidates[k], candidates[j]);
    out.push_back(pool[candidates[k]]);
  }
  return out;
}

/// Stop when the best fitness failed to strictly decrease across the last
/// stall_window generations, or at the generation cap, whichever trips first.
inline std::optional<StopReason> stopping(const std::vector<double>& best_history,
                                          int stall_window, int max_generations) {
  if (best_history.empty()) throw ConfigError("stopping: empty trace");
  const std::size_t n = best_history.size();
  if (n >= static_cast<std::size_t>(stall_window) + 1) {
    const double past = best_history[n - 1 - static_cast<std::size_t>(stall_window)];
    const double cur = best_history[n - 1];
    const double margin = 1e-12 * std::max(std::fabs(past), 1.0);
    const bool progressed = cur < past - margin;
    if (!progressed) return StopReason::stall;
  }
  if (n >= static_cast<std::size_t>(max_generations)) return StopReason::max_generations;
  return std::nullopt;
}

/// Algorithm: generation 0 holds 1 + lambda individuals (the default config
/// when encodable, plus uniform random vectors); afterwards each generation
/// clones the best, applies M_S to lambda_s clones and M_R to lambda_r, and
/// plus-selects. Fitness values are cached per vector; total_evaluations
/// counts distinct vectors this run had to evaluate.
inline TuneResult run_hes(Evaluator& evaluator, const EsConfig& cfg) {
  cfg.validate();
  if (cfg.use_nn_filter && cfg.model->space_fingerprint != evaluator.space().fingerprint())
    throw ConfigError("es: model fingerprint does not match the search space");
  const auto t0 = std::chrono::steady_clock::now();
  const SearchSpace& space = evaluator.space();
  evaluator.baseline();

  Rng rng(cfg.seed);
  OptimizationTrace trace;
  std::map<ParameterVector, FitnessResult> cache;
  auto fitness_of = [&](const ParameterVector& v) {
    auto it = cache.find(v);
    if (it != cache.end()) return it->second;
    FitnessResult r = evaluator.evaluate(v);
    cache.emplace(v, r);
    ++trace.total_evaluations;
    return r;
  };
  auto better = [](const FitnessResult& a, const FitnessResult& b) {
    return a.value < b.value;  // ties keep the earlier individual
  };

  // generation 0, retried with fresh random individuals if everything failed
  Individual best;
  for (int attempt = 0;; ++attempt) {
    std::vector<ParameterVector> initial;
    if (cfg.inject_default && attempt == 0) {
      try {
        initial.push_back(encode(space, default_config()));
      } catch (const ConfigError&) {
        // default config off-grid for this space; start fully random
      }
    }
    while (initial.size() < static_cast<std::size_t>(1 + cfg.lambda()))
      initial.push_back(random_vector(space, rng));

    Generation g0;
    g0.index = 0;
    bool have_best = false;
    for (const ParameterVector& v : initial) {
      Individual ind{v, fitness_of(v)};
      g0.individuals.push_back(ind);
      if (!have_best || better(ind.fitness, g0.best.fitness)) {
        g0.best = ind;
        have_best = true;
      }
    }
    if (std::isfinite(g0.best.fitness.value)) {
      trace.generations.push_back(std::move(g0));
      best = trace.generations.back().best;
      break;
    }
    trace.generations.push_back(std::move(g0));
    if (attempt >= 3) {
      trace.elapsed_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      throw NoFeasibleConfig(std::move(trace));
    }
    trace.generations.clear();
  }

  std::vector<double> history{best.fitness.value};
  while (true) {
    if (auto reason = stopping(history, cfg.stall_window, cfg.max_generations)) {
      trace.stop_reason = *reason;
      break;
    }
    Generation g;
    g.index = static_cast<int>(trace.generations.size());
    g.best = best;
    for (int k = 0; k < cfg.lambda_s; ++k) {
      ParameterVector v = soft_offspring(space, best.vector, rng, cfg.soft_stay_prob);
      Individual ind{v, fitness_of(v)};
      if (better(ind.fitness, g.best.fitness)) g.best = ind;
      g.individuals.push_back(std::move(ind));
    }
    for (ParameterVector& v : random_mutation(space, cfg, rng)) {
      FitnessResult fr = fitness_of(v);
      Individual ind{std::move(v), fr};
      if (better(ind.fitness, g.best.fitness)) g.best = ind;
      g.individuals.push_back(std::move(ind));
    }
    best = g.best;
    history.push_back(best.fitness.value);
    trace.generations.push_back(std::move(g));
  }

  trace.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  TuneResult result;
  result.best_vector = best.vector;
  result.best_fitness = best.fitness;
  result.best_config = decode(space, best.vector);
  result.trace = std::move(trace);
  return result;
}

}  // namespace solvertune
