#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "solvertune/dataset.hpp"
#include "solvertune/evaluator.hpp"
#include "solvertune/problems.hpp"

using namespace solvertune;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SearchSpace two_axis_space() {
  return SearchSpace::from_text(
      "strength_threshold : list(0, 0.25, 0.5)\n"
      "trunc_factor : list(0, 0.3, 0.6, 0.9)\n"
      "cycle : frozen(V)\n"
      "precond_iters : frozen(1)\n"
      "max_row_sum : frozen(1)\n"
      "coarse_matrix_size : frozen(500)\n"
      "coarsening : frozen(classical_rs)\n"
      "interpolation : frozen(classical)\n"
      "p_max_elements : frozen(4)\n"
      "pre_cheby_order : frozen(2)\n"
      "pre_spectrum_fraction : frozen(0.3)\n"
      "post_cheby_order : frozen(2)\n"
      "post_spectrum_fraction : frozen(0.3)\n"
      "outer_max_iters : frozen(50)\n"
      "outer_rel_tol : frozen(1e-08)\n",
      "two_axis");
}

/// Harsh space with a tight iteration budget: plenty of combinations fail on
/// rough coefficient jumps while the constant-coefficient cube forgives them.
SearchSpace harsh_space(int outer_budget) {
  std::string text =
      "cycle : list(V, W, F)\n"
      "precond_iters : ints(1, 3)\n"
      "max_row_sum : list(1e-10, 0.05, 0.25, 0.5, 0.75, 1)\n"
      "coarse_matrix_size : range(50, 500, 150)\n"
      "coarsening : list(classical_rs, pmis_like)\n"
      "interpolation : list(direct, classical)\n"
      "strength_threshold : range(0, 0.9, 0.1)\n"
      "trunc_factor : range(0, 0.9, 0.1)\n"
      "p_max_elements : ints(0, 10)\n"
      "pre_cheby_order : ints(1, 4)\n"
      "pre_spectrum_fraction : list(1e-10, 0.1, 0.3, 0.5, 0.7, 0.9)\n"
      "post_cheby_order : ints(1, 4)\n"
      "post_spectrum_fraction : list(1e-10, 0.1, 0.3, 0.5, 0.7, 0.9)\n"
      "outer_max_iters : frozen(" +
      std::to_string(outer_budget) +
      ")\n"
      "outer_rel_tol : frozen(1e-08)\n";
  return SearchSpace::from_text(text, "harsh");
}

Dataset make_raw(std::vector<double> values) {
  Dataset d;
  d.dims = 1;
  d.stage = DatasetStage::raw;
  int i = 0;
  for (double v : values) {
    FitnessSample s;
    s.vector.indices = {i++ % 3};
    s.value = v;
    s.converged = std::isfinite(v);
    d.samples.push_back(s);
  }
  return d;
}

std::vector<double> values_of(const Dataset& d) {
  std::vector<double> v;
  for (const FitnessSample& s : d.samples) v.push_back(s.value);
  return v;
}

}  // namespace

TEST_CASE("type-7 quantile") {
  CHECK(quantile_type7({1, 2, 3, 4}, 0.75) == 3.25);
  CHECK(quantile_type7({4, 1, 3, 2}, 0.75) == 3.25);  // sorting is internal
  CHECK(quantile_type7({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile_type7({7}, 0.75) == 7.0);
  CHECK_THROWS_AS(quantile_type7({}, 0.75), ConfigError);
}

TEST_CASE("balance replaces the tail and the failures with Q3") {
  Dataset raw = make_raw({1, 2, 3, 4, kInf});
  Dataset b = balance(raw);
  CHECK(b.stage == DatasetStage::balanced);
  CHECK(b.q3 == 3.25);
  CHECK(values_of(b) == std::vector<double>{1, 2, 3, 3.25, 3.25});
  // converged flags are untouched; only fitness values are filtered
  CHECK_FALSE(b.samples[4].converged);
}

TEST_CASE("balance on constant values only rewrites the failures") {
  Dataset raw = make_raw({5, 5, 5, 5, kInf});
  Dataset b = balance(raw);
  CHECK(b.q3 == 5.0);
  CHECK(values_of(b) == std::vector<double>{5, 5, 5, 5, 5});
}

TEST_CASE("balance is idempotent and compresses the range") {
  Dataset raw = make_raw({0.01, 0.02, 0.05, 0.073, 0.5, 1.0, 3.0, kInf, kInf});
  Dataset b1 = balance(raw);
  Dataset b2 = balance(b1);
  CHECK(values_of(b2) == values_of(b1));
  CHECK(b2.q3 == b1.q3);

  auto range = [](const std::vector<double>& v) {
    double lo = kInf, hi = -kInf;
    for (double x : v)
      if (std::isfinite(x)) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    return hi - lo;
  };
  CHECK(range(values_of(b1)) <= range(values_of(raw)));

  // order-preserving on values <= Q3, and no value's rank decreases
  for (std::size_t i = 0; i < raw.samples.size(); ++i)
    for (std::size_t j = 0; j < raw.samples.size(); ++j)
      if (raw.samples[i].value <= b1.q3 && raw.samples[j].value <= b1.q3 &&
          raw.samples[i].value < raw.samples[j].value)
        CHECK(b1.samples[i].value <= b1.samples[j].value);
}

TEST_CASE("balance needs at least four finite samples") {
  CHECK_THROWS_AS(balance(make_raw({1, 2, 3, kInf})), ConfigError);
  CHECK_NOTHROW(balance(make_raw({1, 2, 3, 4})));
}

TEST_CASE("make_unbalanced keeps the finite tail") {
  Dataset raw = make_raw({1, 2, 3, 4, 40, kInf});
  Dataset u = make_unbalanced(raw);
  CHECK(u.stage == DatasetStage::unbalanced);
  const double q3 = quantile_type7({1, 2, 3, 4, 40}, 0.75);
  CHECK(u.q3 == q3);
  CHECK(values_of(u) == std::vector<double>{1, 2, 3, 4, 40, q3});
  // balancing the unbalanced dataset agrees with balancing the raw one
  CHECK(values_of(balance(u)) == values_of(balance(raw)));
}

TEST_CASE("split: sizes, determinism, disjoint union") {
  Dataset d = make_raw({});
  for (int i = 0; i < 50000; ++i) {
    FitnessSample s;
    s.vector.indices = {i % 3};
    s.value = static_cast<double>(i);
    s.converged = true;
    d.samples.push_back(s);
  }
  d.dims = 1;
  Rng rng(17);
  auto [train, val] = split(d, 0.1, rng);
  CHECK(train.size() == 45000);  // the paper's 45k/5k split
  CHECK(val.size() == 5000);

  Rng rng2(17);
  auto [train2, val2] = split(d, 0.1, rng2);
  CHECK(values_of(val) == values_of(val2));

  // union preserved
  std::map<double, int> seen;
  for (const auto& s : train.samples) ++seen[s.value];
  for (const auto& s : val.samples) ++seen[s.value];
  CHECK(seen.size() == 50000);

  Dataset tiny = make_raw({1, 2});
  Rng rng3(1);
  auto [t2, v2] = split(tiny, 0.5, rng3);
  CHECK(t2.size() == 1);
  CHECK(v2.size() == 1);

  CHECK_THROWS_AS(split(tiny, 0.001, rng3), ConfigError);
  CHECK_THROWS_AS(split(tiny, 0.999, rng3), ConfigError);
  CHECK_THROWS_AS(split(tiny, 0.0, rng3), ConfigError);
}

TEST_CASE("dataset file round trip") {
  Dataset d = make_raw({1.5, kInf, 0.25, 3.125});
  d.space_fingerprint = 0xabcdef0123456789ull;
  d.mode = FitnessMode::work_units;
  d.problem = "cube:4";
  d.seed = 77;
  std::ostringstream out;
  save_dataset(d, out);
  std::istringstream in(out.str());
  Dataset back = load_dataset(in, "rt");
  CHECK(back.space_fingerprint == d.space_fingerprint);
  CHECK(back.mode == d.mode);
  CHECK(back.stage == DatasetStage::raw);
  CHECK(back.problem == d.problem);
  CHECK(back.seed == 77);
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back.samples[i].vector == d.samples[i].vector);
    CHECK((std::isinf(back.samples[i].value)
               ? std::isinf(d.samples[i].value)
               : back.samples[i].value == d.samples[i].value));
    CHECK(back.samples[i].converged == d.samples[i].converged);
  }

  Dataset balanced = balance(make_raw({1, 2, 3, 4, kInf}));
  std::ostringstream out2;
  save_dataset(balanced, out2);
  std::istringstream in2(out2.str());
  Dataset back2 = load_dataset(in2, "rt2");
  CHECK(back2.stage == DatasetStage::balanced);
  CHECK(back2.q3 == 3.25);
}

TEST_CASE("evaluate: identity problem converges within one iteration") {
  Problem p;
  p.name = "identity";
  std::vector<Triplet> t;
  for (index_t i = 0; i < 64; ++i) t.push_back({i, i, 1.0});
  p.A = CsrMatrix::from_triplets(64, 64, t);
  p.b.assign(64, 1.0);
  Evaluator ev(p, two_axis_space(), {});
  FitnessResult r = ev.evaluate(ParameterVector{{0, 0}});
  CHECK(r.converged);
  CHECK(r.outcome.iterations <= 1);
  CHECK(std::isfinite(r.value));
}

TEST_CASE("evaluate: work-units fitness is deterministic and memoized") {
  Problem p = build_problem("cube:8");
  ParameterVector v{{1, 1}};
  double first = 0.0;
  long solves_after_two_calls = 0;
  {
    Evaluator ev(p, two_axis_space(), {});
    FitnessResult a = ev.evaluate(v);
    FitnessResult b = ev.evaluate(v);
    first = a.value;
    CHECK(a.value == b.value);
    solves_after_two_calls = ev.total_solves();
  }
  {
    Evaluator ev(p, two_axis_space(), {});
    CHECK(ev.evaluate(v).value == first);  // fresh evaluator, bit-identical
  }
  // baseline + one real solve; the second call hit the memo
  CHECK(solves_after_two_calls == 2);
}

TEST_CASE("evaluate: failures become infinite fitness, never exceptions") {
  Problem p = build_problem("cube:6");
  SECTION("iteration budget zero") {
    EvalBudget budget;
    budget.max_outer_iters = 0;
    Evaluator ev(p, two_axis_space(), budget);
    FitnessResult r = ev.evaluate(ParameterVector{{0, 0}});
    CHECK_FALSE(r.converged);
    CHECK(r.value == kInf);
  }
  SECTION("work cap exhausted") {
    EvalBudget budget;
    budget.work_cap = 1.0;
    Evaluator ev(p, two_axis_space(), budget);
    FitnessResult r = ev.evaluate(ParameterVector{{0, 0}});
    CHECK_FALSE(r.converged);
    CHECK(r.value == kInf);
    CHECK(r.outcome.failure == "work cap exceeded");
  }
  SECTION("wall-clock timeout") {
    EvalBudget budget;
    budget.mode = FitnessMode::wall_time;
    budget.timeout_seconds = 1e-9;
    Evaluator ev(p, two_axis_space(), budget);
    FitnessResult r = ev.evaluate(ParameterVector{{0, 0}});
    CHECK_FALSE(r.converged);
    CHECK(r.value == kInf);
  }
}

TEST_CASE("evaluate: wall-time mode reports positive seconds") {
  Problem p = build_problem("cube:8");
  EvalBudget budget;
  budget.mode = FitnessMode::wall_time;
  budget.repeats = 3;
  Evaluator ev(p, two_axis_space(), budget);
  FitnessResult r = ev.evaluate(ParameterVector{{1, 1}});
  REQUIRE(r.converged);
  CHECK(r.value > 0.0);
  CHECK(r.mode == FitnessMode::wall_time);
}

TEST_CASE("sample_dataset: determinism, sink order, resume") {
  Problem p = build_problem("cube:6");
  SearchSpace space = two_axis_space();
  Evaluator ev(p, space, {});
  std::vector<std::size_t> seen;
  Dataset d1 = sample_dataset(ev, 12, 99, [&](std::size_t i, const FitnessSample&) {
    seen.push_back(i);
  });
  CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  CHECK(d1.size() == 12);
  CHECK(d1.seed == 99);
  CHECK(d1.space_fingerprint == space.fingerprint());

  Evaluator ev2(p, space, {});
  Dataset d2 = sample_dataset(ev2, 12, 99);
  CHECK(values_of(d1) == values_of(d2));
  for (std::size_t i = 0; i < d1.size(); ++i)
    CHECK(d1.samples[i].vector == d2.samples[i].vector);

  // resume from a prefix reproduces the full run exactly
  Evaluator ev3(p, space, {});
  std::vector<FitnessSample> prefix(d1.samples.begin(), d1.samples.begin() + 5);
  Dataset d3 = sample_dataset(ev3, 12, 99, {}, 1, 5, prefix);
  CHECK(values_of(d3) == values_of(d1));

  CHECK_THROWS_AS(sample_dataset(ev3, 0, 1), ConfigError);
  CHECK_THROWS_AS(sample_dataset(ev3, 5, 1, {}, 1, 2, {}), ConfigError);
}

TEST_CASE("sample_dataset: single sample") {
  Problem p = build_problem("cube:4");
  Evaluator ev(p, two_axis_space(), {});
  Dataset d = sample_dataset(ev, 1, 3);
  CHECK(d.size() == 1);
}

TEST_CASE("sample_dataset: parallel evaluation matches serial") {
  Problem p = build_problem("cube:6");
  SearchSpace space = two_axis_space();
  Evaluator serial(p, space, {});
  Evaluator parallel(p, space, {});
  Dataset ds = sample_dataset(serial, 30, 5, {}, 1);
  Dataset dp = sample_dataset(parallel, 30, 5, {}, 4);
  CHECK(values_of(ds) == values_of(dp));
}

TEST_CASE("harder problems fail more often: cube vs jumps") {
  SearchSpace space = harsh_space(20);
  Problem cube = build_problem("cube:12");
  Problem jumps = build_problem("jumps:12");
  Evaluator ev_cube(cube, space, {});
  Evaluator ev_jumps(jumps, space, {});
  Dataset d_cube = sample_dataset(ev_cube, 150, 424242);
  Dataset d_jumps = sample_dataset(ev_jumps, 150, 424242);
  const double frac_cube = dataset_stats(d_cube).non_converged_fraction;
  const double frac_jumps = dataset_stats(d_jumps).non_converged_fraction;
  INFO("cube " << frac_cube << " vs jumps " << frac_jumps);
  CHECK(frac_jumps > frac_cube);
}

TEST_CASE("dataset stats expose the non-converged fraction the way tables report it") {
  Dataset d = make_raw({1, 2, 3, 4, kInf, kInf});
  DatasetStats st = dataset_stats(d);
  CHECK(st.total == 6);
  CHECK(st.finite == 4);
  CHECK(st.non_converged_fraction == Catch::Approx(2.0 / 6.0));
  CHECK(st.min == 1.0);
  CHECK(st.median == 2.5);
  CHECK(st.q3 == 3.25);
}
