#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>
#include <unordered_map>
#include <vector>

#include "solvertune/amg_hierarchy.hpp"
#include "solvertune/bicgstab.hpp"
#include "solvertune/dataset.hpp"
#include "solvertune/param_space.hpp"
#include "solvertune/problems.hpp"

namespace solvertune {

struct FitnessResult {
  double value = std::numeric_limits<double>::infinity();
  bool converged = false;
  FitnessMode mode = FitnessMode::work_units;
  SolveOutcome outcome;
};

/// Per-solve resource limits. Zeroed fields are derived from the default
/// configuration's cost on the problem (20x rule): wall-clock timeout in
/// wall-time mode, a deterministic work cap in work-units mode.
struct EvalBudget {
  FitnessMode mode = FitnessMode::work_units;
  int max_outer_iters = -1;    // <0: take the config's own value
  double timeout_seconds = 0;  // wall-time mode
  double work_cap = 0;         // work-units mode
  int repeats = 3;             // timed repeats, median, wall-time mode
};

/// Fitness measurement for one problem + search space. All failure paths
/// (setup errors, non-convergence, budget exhaustion) surface as infinite
/// fitness, never as exceptions. Results are memoized; in work-units mode
/// fitness is a pure function of the vector, in wall-time mode the cache
/// just avoids re-measuring (it cannot change the optimizer's selection).
class Evaluator {
 public:
  Evaluator(const Problem& problem, SearchSpace space, EvalBudget budget = {})
      : problem_(problem), space_(std::move(space)), budget_(budget) {
    space_.validate();
  }

  const Problem& problem() const { return problem_; }
  const SearchSpace& space() const { return space_; }
  FitnessMode mode() const { return budget_.mode; }
  const EvalBudget& budget() const { return budget_; }
  long total_solves() const { return total_solves_.load(); }

  /// Fitness of the default configuration; fixes the derived budget caps.
  FitnessResult baseline() {
    std::call_once(baseline_once_, [this] {
      baseline_ = measure(default_config(), /*limits already fixed=*/false);
      if (budget_.mode == FitnessMode::work_units && budget_.work_cap <= 0.0) {
        budget_.work_cap = baseline_.converged ? 20.0 * baseline_.outcome.work_units
                                               : 2000.0 * static_cast<double>(problem_.A.nnz());
      }
      if (budget_.mode == FitnessMode::wall_time && budget_.timeout_seconds <= 0.0) {
        budget_.timeout_seconds =
            baseline_.converged
                ? std::max(1.0, 20.0 * (baseline_.outcome.wall_time + baseline_.outcome.setup_time))
                : 30.0;
      }
    });
    return baseline_;
  }

  FitnessResult evaluate(const ParameterVector& v) {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = memo_.find(v);
      if (it != memo_.end()) return it->second;
    }
    FitnessResult r;
    SolverConfig cfg;
    bool decoded = false;
    try {
      cfg = decode(space_, v);
      decoded = true;
    } catch (const ConfigError&) {
      r = FitnessResult{};
    }
    if (decoded) r = evaluate_config(cfg);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      memo_.emplace(v, r);
    }
    return r;
  }

  /// Evaluates an arbitrary config (not necessarily on the grid); no memo.
  FitnessResult evaluate_config(const SolverConfig& cfg) {
    baseline();
    return measure(cfg, true);
  }

 private:
  FitnessResult measure(const SolverConfig& cfg, bool limits_fixed) {
    FitnessResult res;
    res.mode = budget_.mode;
    SolveLimits lim;
    lim.max_outer_iters = budget_.max_outer_iters >= 0 ? budget_.max_outer_iters : -1;
    std::optional<std::chrono::steady_clock::time_point> deadline;
    if (limits_fixed) {
      if (budget_.mode == FitnessMode::work_units && budget_.work_cap > 0.0)
        lim.work_cap = budget_.work_cap;
      if (budget_.mode == FitnessMode::wall_time && budget_.timeout_seconds > 0.0) {
        deadline = std::chrono::steady_clock::now() +
                   std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                       std::chrono::duration<double>(budget_.timeout_seconds));
        lim.deadline = deadline;
      }
    }
    total_solves_.fetch_add(1);
    try {
      BuildGuards guards;
      guards.deadline = deadline;
      const auto t0 = std::chrono::steady_clock::now();
      AmgHierarchy h = build_hierarchy(problem_.A, cfg, guards);
      const double setup =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      DenseVector x;
      if (budget_.mode == FitnessMode::work_units) {
        res.outcome = bicgstab_solve(problem_.A, problem_.b, h, cfg, x, lim);
        res.outcome.setup_time = setup;
        res.converged = res.outcome.converged;
        res.value = res.converged ? res.outcome.work_units
                                  : std::numeric_limits<double>::infinity();
      } else {
        // median of `repeats` timed solves, setup excluded
        std::vector<double> times;
        bool all_ok = true;
        for (int rep = 0; rep < std::max(1, budget_.repeats) && all_ok; ++rep) {
          res.outcome = bicgstab_solve(problem_.A, problem_.b, h, cfg, x, lim);
          res.outcome.setup_time = setup;
          all_ok = res.outcome.converged;
          times.push_back(res.outcome.wall_time);
          if (deadline && std::chrono::steady_clock::now() > *deadline) {
            all_ok = false;
            res.outcome.failure = "timeout";
          }
        }
        res.converged = all_ok;
        if (all_ok) {
          std::sort(times.begin(), times.end());
          res.value = times[times.size() / 2];
        }
      }
    } catch (const SolverSetupError& e) {
      res.converged = false;
      res.outcome.failure = e.what();
    }
    return res;
  }

  const Problem& problem_;
  SearchSpace space_;
  EvalBudget budget_;
  std::once_flag baseline_once_;
  FitnessResult baseline_;
  std::mutex mutex_;
  std::unordered_map<ParameterVector, FitnessResult, ParameterVectorHash> memo_;
  std::atomic<long> total_solves_{0};
};

/// Draws `count` uniform vectors (all upfront, so interrupted runs can resume
/// with the same sequence) and evaluates them in order. `sink`, when set, is
/// called once per finished sample in sample order — the checkpoint hook.
/// `start_index`/`existing` let a resumed run skip what is already on disk.
inline Dataset sample_dataset(Evaluator& ev, std::size_t count, std::uint64_t seed,
                              const std::function<void(std::size_t, const FitnessSample&)>& sink = {},
                              int jobs = 1, std::size_t start_index = 0,
                              std::vector<FitnessSample> existing = {}) {
  if (count < 1) throw ConfigError("sample count must be >= 1");
  if (start_index != existing.size())
    throw ConfigError("resume state inconsistent: start index does not match existing samples");
  Dataset d;
  d.space_fingerprint = ev.space().fingerprint();
  d.dims = ev.space().dims();
  d.mode = ev.mode();
  d.stage = DatasetStage::raw;
  d.problem = ev.problem().name;
  d.seed = seed;
  d.samples = std::move(existing);

  Rng rng(seed);
  std::vector<ParameterVector> vectors;
  vectors.reserve(count);
  for (std::size_t i = 0; i < count; ++i) vectors.push_back(random_vector(ev.space(), rng));

  ev.baseline();  // fix budget caps before any worker starts
  const bool parallel = jobs > 1 && ev.mode() == FitnessMode::work_units;
  const std::size_t chunk = parallel ? 64 : 1;
  for (std::size_t base = start_index; base < count; base += chunk) {
    const std::size_t end = std::min(count, base + chunk);
    std::vector<FitnessSample> block(end - base);
    if (parallel && end - base > 1) {
      std::atomic<std::size_t> next{base};
      auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < end; i = next.fetch_add(1)) {
          FitnessResult r = ev.evaluate(vectors[i]);
          block[i - base] = {vectors[i], r.value, r.converged};
        }
      };
      std::vector<std::thread> pool;
      const int n_threads = std::min<int>(jobs, static_cast<int>(end - base));
      pool.reserve(static_cast<std::size_t>(n_threads));
      for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    } else {
      for (std::size_t i = base; i < end; ++i) {
        FitnessResult r = ev.evaluate(vectors[i]);
        block[i - base] = {vectors[i], r.value, r.converged};
      }
    }
    for (std::size_t i = base; i < end; ++i) {
      d.samples.push_back(block[i - base]);
      if (sink) sink(i, d.samples.back());
    }
  }
  return d;
}

}  // namespace solvertune
