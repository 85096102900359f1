// solvertune: autotuner for a BiCGStab + AMG linear solver. Subcommands cover
// problem generation, fitness-dataset sampling, surrogate training, hybrid
// evolution strategy tuning, one-shot solving and the methodological bench
// experiments.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "solvertune/es.hpp"
#include "solvertune/evaluator.hpp"
#include "solvertune/experiments.hpp"
#include "solvertune/manifest.hpp"
#include "solvertune/matrix_market.hpp"
#include "solvertune/mlp.hpp"
#include "solvertune/problems.hpp"

namespace st = solvertune;
namespace fs = std::filesystem;

namespace {

// Stable exit-code contract; scripts depend on these.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitIo = 4;
constexpr int kExitInternal = 5;

struct CommonOpts {
  std::string mode = "work-units";
  std::uint64_t seed = 0;
  int jobs = 1;

  st::FitnessMode fitness_mode() const { return st::fitness_mode_from(mode); }
};

st::RunManifest make_manifest(const std::string& command, int argc, char** argv,
                              st::FitnessMode mode, std::uint64_t seed) {
  st::RunManifest m;
  m.command = command;
  std::string args;
  for (int i = 2; i < argc; ++i) {
    if (i > 2) args += " ";
    args += argv[i];
  }
  m.arguments = args;
  m.seeds.emplace_back("seed", seed);
  // deterministic artifacts in work-units mode: no timestamp in file bytes
  if (mode == st::FitnessMode::wall_time) m.timestamp = st::RunManifest::now_utc();
  return m;
}

void print_manifest(const st::RunManifest& m) {
  st::RunManifest full = m;
  if (full.timestamp.empty()) full.timestamp = st::RunManifest::now_utc();
  std::cout << full.render("");
}

st::ProblemSpec parse_problem_opts(const std::string& spec, const std::string& rhs,
                                   std::uint64_t seed) {
  st::ProblemSpec p = st::parse_problem_spec(spec);
  if (rhs.empty() || rhs == "ones") {
    p.rhs = st::RhsKind::ones;
  } else if (rhs == "divrand") {
    p.rhs = st::RhsKind::divergence_free_random;
    p.rhs_seed = seed;
  } else if (rhs.rfind("file:", 0) == 0) {
    p.rhs = st::RhsKind::file;
    p.rhs_path = rhs.substr(5);
  } else {
    throw st::ConfigError("unknown rhs kind '" + rhs + "' (ones | divrand | file:PATH)");
  }
  return p;
}

/// The built-in seven-parameter space (same content as data/space7.txt).
st::SearchSpace builtin_space7() {
  return st::SearchSpace::from_text(
      "coarsening : list(classical_rs, pmis_like)\n"
      "interpolation : list(direct, classical)\n"
      "strength_threshold : range(0, 0.9, 0.05)\n"
      "trunc_factor : range(0, 0.9, 0.1)\n"
      "p_max_elements : ints(0, 10)\n"
      "pre_cheby_order : ints(1, 4)\n"
      "post_cheby_order : ints(1, 4)\n"
      "cycle : frozen(V)\n"
      "precond_iters : frozen(1)\n"
      "max_row_sum : frozen(1)\n"
      "coarse_matrix_size : frozen(500)\n"
      "pre_spectrum_fraction : frozen(0.3)\n"
      "post_spectrum_fraction : frozen(0.3)\n"
      "outer_max_iters : frozen(50)\n"
      "outer_rel_tol : frozen(1e-08)\n",
      "builtin:space7");
}

st::SearchSpace load_space_or_builtin(const std::string& path) {
  if (path.empty()) return builtin_space7();
  return st::SearchSpace::from_file(path);
}

// --------------------------------------------------------------------------

int cmd_gen_problem(const std::string& spec, const std::string& rhs, const std::string& out,
                    const CommonOpts& common, const st::RunManifest& manifest) {
  st::ProblemSpec ps = parse_problem_opts(spec, rhs, common.seed);
  st::Problem p = st::build_problem(ps);
  const std::string mtx = out + ".mtx";
  const std::string vec = out + ".rhs";
  st::write_matrix_market(p.A, mtx, manifest.render(" "));
  st::write_vector_mm(p.b, vec, manifest.render(" "));
  print_manifest(manifest);
  std::cout << "problem " << p.name << ": " << p.A.n_rows << " rows, " << p.A.nnz()
            << " nonzeros\nwrote " << mtx << "\nwrote " << vec << "\n";
  return kExitOk;
}

/// Lenient dataset reader for resuming: tolerates a torn trailing line.
st::Dataset load_partial_dataset(const std::string& path, std::size_t* declared_count) {
  std::ifstream in(path);
  if (!in) throw st::IoError("cannot open dataset file: " + path);
  std::ostringstream header;
  std::string line;
  std::vector<std::string> body;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      header << line << "\n";
      auto colon = line.find(':');
      if (colon != std::string::npos &&
          st::space_detail::trim(line.substr(1, colon - 1)) == "count")
        *declared_count = std::stoull(st::space_detail::trim(line.substr(colon + 1)));
    } else if (!line.empty()) {
      body.push_back(line);
    }
  }
  while (!body.empty()) {
    std::istringstream probe(header.str() + body.back() + "\n");
    try {
      st::load_dataset(probe, path);
      break;
    } catch (const std::exception&) {
      body.pop_back();  // torn tail line
    }
  }
  std::ostringstream whole;
  whole << header.str();
  for (const std::string& l : body) whole << l << "\n";
  std::istringstream full(whole.str());
  return st::load_dataset(full, path);
}

int cmd_sample(const std::string& problem_spec, const std::string& space_path, std::size_t count,
               const std::string& out, bool force, const CommonOpts& common,
               const st::RunManifest& manifest) {
  st::SearchSpace space = load_space_or_builtin(space_path);
  st::Problem problem = st::build_problem(problem_spec);
  st::EvalBudget budget;
  budget.mode = common.fitness_mode();
  st::Evaluator evaluator(problem, space, budget);

  std::size_t start_index = 0;
  std::vector<st::FitnessSample> existing;
  if (fs::exists(out) && !force) {
    std::size_t declared = 0;
    st::Dataset partial = load_partial_dataset(out, &declared);
    const bool header_matches = partial.space_fingerprint == space.fingerprint() &&
                                partial.seed == common.seed &&
                                partial.mode == common.fitness_mode() &&
                                partial.problem == problem_spec && declared == count;
    if (!header_matches)
      throw st::IoError("output " + out +
                        " exists with a different header; use --force to overwrite");
    if (partial.size() >= count) {
      std::cout << out << " already holds " << partial.size() << " samples; nothing to do\n";
      return kExitOk;
    }
    start_index = partial.size();
    existing = std::move(partial.samples);
    std::cout << "resuming " << out << " at sample " << start_index << "\n";
  }

  std::ofstream sink_stream;
  if (start_index == 0) {
    sink_stream.open(out, std::ios::trunc);
    if (!sink_stream) throw st::IoError("cannot write dataset file: " + out);
    sink_stream << "# solvertune dataset v1\n"
                << manifest.render("# ") << "# space: "
                << st::fingerprint_hex(space.fingerprint()) << "\n"
                << "# dims: " << space.dims() << "\n"
                << "# mode: " << to_string(common.fitness_mode()) << "\n"
                << "# stage: raw\n"
                << "# problem: " << problem_spec << "\n"
                << "# seed: " << common.seed << "\n"
                << "# count: " << count << "\n";
  } else {
    sink_stream.open(out, std::ios::app);
    if (!sink_stream) throw st::IoError("cannot append to dataset file: " + out);
  }

  long written = 0;
  auto sink = [&](std::size_t, const st::FitnessSample& s) {
    for (int idx : s.vector.indices) sink_stream << idx << " ";
    if (std::isfinite(s.value))
      sink_stream << st::detail::format_double(s.value);
    else
      sink_stream << "inf";
    sink_stream << " " << (s.converged ? 1 : 0) << "\n";
    if (++written % 32 == 0) sink_stream.flush();
  };
  st::Dataset d = st::sample_dataset(evaluator, count, common.seed, sink, common.jobs,
                                     start_index, std::move(existing));
  sink_stream.flush();
  print_manifest(manifest);
  st::DatasetStats stats = st::dataset_stats(d);
  std::printf("sampled %zu vectors on %s (%s): non-converged %.1f%%, min %.6g, median %.6g\n",
              d.size(), problem_spec.c_str(), to_string(common.fitness_mode()),
              100.0 * stats.non_converged_fraction, stats.min, stats.median);
  std::cout << "wrote " << out << "\n";
  return kExitOk;
}

int cmd_stats(const std::string& data_path) {
  st::Dataset d = st::load_dataset(data_path);
  st::DatasetStats s = st::dataset_stats(d);
  std::printf("dataset %s\n", data_path.c_str());
  std::printf("  problem:        %s\n", d.problem.c_str());
  std::printf("  space:          %s\n", st::fingerprint_hex(d.space_fingerprint).c_str());
  std::printf("  stage:          %s\n", to_string(d.stage));
  std::printf("  mode:           %s\n", to_string(d.mode));
  std::printf("  samples:        %zu\n", s.total);
  std::printf("  non-converged:  %.2f%%\n", 100.0 * s.non_converged_fraction);
  if (s.finite > 0) {
    std::printf("  min:            %.6g\n", s.min);
    std::printf("  median:         %.6g\n", s.median);
    if (s.finite >= 4) std::printf("  Q3:             %.6g\n", s.q3);
  }
  return kExitOk;
}

int cmd_balance(const std::string& data_path, const std::string& out, bool unbalanced,
                const st::RunManifest& manifest) {
  st::Dataset d = st::load_dataset(data_path);
  st::Dataset processed = unbalanced ? st::make_unbalanced(d) : st::balance(d);
  st::save_dataset(processed, out, &manifest);
  print_manifest(manifest);
  std::printf("%s dataset written to %s (Q3 = %.6g)\n", to_string(processed.stage), out.c_str(),
              processed.q3);
  return kExitOk;
}

int cmd_train(const std::string& data_path, const std::string& space_path, double val_fraction,
              const std::string& out, const CommonOpts& common,
              const st::RunManifest& manifest) {
  st::SearchSpace space = load_space_or_builtin(space_path);
  st::Dataset d = st::load_dataset(data_path);
  st::Rng split_rng(st::splitmix64(common.seed ^ 0xBEEFu));
  auto [train, val] = st::split(d, val_fraction, split_rng);
  st::TrainConfig cfg;
  cfg.seed = common.seed;
  st::TrainReport report;
  st::MlpModel model = st::train_mlp(space, train, cfg, &report);
  st::PredictionMetrics metrics = st::evaluate_model(model, space, val);
  model.save(out, &manifest);
  print_manifest(manifest);
  std::printf("trained on %zu samples (%ld epochs, %ld steps); validated on %zu\n", train.size(),
              report.epochs, report.steps, val.size());
  std::printf("METRICS mse=%.8g r2=%.6f", metrics.mse, metrics.r_squared);
  for (const auto& [alpha, f] : metrics.f_alpha) std::printf(" f_%g=%.4f", alpha, f);
  std::printf(" n_train=%zu n_val=%zu epochs=%ld\n", train.size(), val.size(), report.epochs);
  auto f05 = metrics.f_alpha.find(0.05);
  if (f05 != metrics.f_alpha.end() && f05->second < 0.3)
    std::printf("WARNING: F_0.05 = %.3f is low; judge this model by F_alpha, not R2 alone\n",
                f05->second);
  std::cout << "wrote " << out << "\n";
  return kExitOk;
}

int cmd_tune(const std::string& problem_spec, const std::string& space_path,
             const std::string& model_path, const std::string& out,
             const std::string& trace_path, st::EsConfig es, const CommonOpts& common,
             const st::RunManifest& manifest) {
  st::SearchSpace space = load_space_or_builtin(space_path);
  st::Problem problem = st::build_problem(problem_spec);
  st::EvalBudget budget;
  budget.mode = common.fitness_mode();
  st::Evaluator evaluator(problem, space, budget);

  if (!model_path.empty()) {
    es.use_nn_filter = true;
    es.model = std::make_shared<st::MlpModel>(st::MlpModel::load(model_path));
  }
  es.seed = common.seed;

  st::TuneResult result = st::run_hes(evaluator, es);

  std::ofstream cfg_out(out);
  if (!cfg_out) throw st::IoError("cannot write config file: " + out);
  cfg_out << manifest.render("# ");
  cfg_out << "# best fitness: " << st::detail::format_double(result.best_fitness.value) << " ("
          << to_string(common.fitness_mode()) << ")\n";
  cfg_out << result.best_config.to_text();

  if (!trace_path.empty()) {
    std::ofstream trace_out(trace_path);
    if (!trace_out) throw st::IoError("cannot write trace file: " + trace_path);
    trace_out << manifest.render("# ");
    trace_out << "# generation best_fitness evaluations\n";
    long evals = 0;
    std::map<st::ParameterVector, bool> seen;
    for (const st::Generation& g : result.trace.generations) {
      for (const st::Individual& ind : g.individuals)
        if (seen.emplace(ind.vector, true).second) ++evals;
      trace_out << g.index << " " << st::detail::format_double(g.best.fitness.value) << " "
                << evals << "\n";
    }
  }

  print_manifest(manifest);
  const st::FitnessResult baseline = evaluator.baseline();
  std::printf("stopped after %zu generations (%s), %ld distinct evaluations\n",
              result.trace.generations.size(), to_string(result.trace.stop_reason),
              result.trace.total_evaluations);
  std::printf("best fitness: %.6g (%s)\n", result.best_fitness.value,
              to_string(common.fitness_mode()));
  if (baseline.converged && std::isfinite(result.best_fitness.value)) {
    std::printf("default config fitness: %.6g — speedup %.2fx\n", baseline.value,
                baseline.value / result.best_fitness.value);
  } else if (!baseline.converged) {
    std::printf("default config does not converge on this problem\n");
  }
  std::cout << "wrote " << out << "\n";
  return kExitOk;
}

int cmd_solve(const std::string& problem_spec, const std::string& rhs,
              const std::string& config_path, const std::string& out,
              const CommonOpts& common, const st::RunManifest& manifest) {
  st::ProblemSpec ps = parse_problem_opts(problem_spec, rhs, common.seed);
  st::Problem problem = st::build_problem(ps);
  st::SolverConfig cfg =
      config_path.empty() ? st::default_config() : st::SolverConfig::from_file(config_path);
  const auto t0 = std::chrono::steady_clock::now();
  st::AmgHierarchy h = st::build_hierarchy(problem.A, cfg);
  const double setup =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  st::DenseVector x;
  st::SolveOutcome outcome = st::bicgstab_solve(problem.A, problem.b, h, cfg, x);
  print_manifest(manifest);
  std::printf("problem %s: %lld rows, %lld nonzeros, %zu levels\n", problem.name.c_str(),
              static_cast<long long>(problem.A.n_rows), static_cast<long long>(problem.A.nnz()),
              h.num_levels());
  std::printf("converged:         %s\n", outcome.converged ? "yes" : "no");
  std::printf("iterations:        %d\n", outcome.iterations);
  std::printf("relative residual: %.6e\n", outcome.final_relative_residual);
  std::printf("work units:        %.6g\n", outcome.work_units);
  std::printf("setup time:        %.4f s\n", setup);
  std::printf("solve time:        %.4f s\n", outcome.wall_time);
  if (!outcome.converged) std::printf("failure:           %s\n", outcome.failure.c_str());
  if (!out.empty()) {
    st::write_vector_mm(x, out, manifest.render(" "));
    std::cout << "wrote " << out << "\n";
  }
  return outcome.converged ? kExitOk : kExitInfeasible;
}

// --------------------------------------------------------------------------
// bench: desk-scale reproductions of the methodological studies

void write_lines(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw st::IoError("cannot write " + path);
  out << content;
}

int cmd_bench(const std::string& name, const std::string& out_dir, const std::string& problem,
              const std::string& space_path, int trials, std::size_t samples,
              const CommonOpts& common, const st::RunManifest& manifest) {
  fs::create_directories(out_dir);
  const std::string head = manifest.render("# ");
  auto csv_path = [&](const std::string& stem) { return out_dir + "/" + stem + ".csv"; };
  auto txt_path = [&](const std::string& stem) { return out_dir + "/" + stem + ".txt"; };

  if (name == "f-alpha-vs-nv") {
    std::ostringstream csv, txt;
    csv << head << "n_v,mean_f005,stddev_f005\n";
    txt << "F_0.05 reliability vs validation size (5 re-splits per size)\n";
    for (const st::FAlphaVsNvRow& row : st::f_alpha_vs_nv_experiment(common.seed + 1)) {
      csv << row.n_v << "," << row.mean_f << "," << row.stddev_f << "\n";
      char line[96];
      std::snprintf(line, sizeof(line), "  N_v %5zu: mean %.4f stddev %.4f\n", row.n_v,
                    row.mean_f, row.stddev_f);
      txt << line;
    }
    write_lines(csv_path(name), csv.str());
    write_lines(txt_path(name), txt.str());
    std::cout << txt.str();
  } else if (name == "balancing") {
    st::BalancingResult r =
        st::balancing_experiment(builtin_space7(), common.seed + 2, samples ? samples : 1600);
    std::ostringstream csv, txt;
    csv << head << "stage,f005,r2\nunbalanced," << r.f_unbalanced << "," << r.r2_unbalanced
        << "\nbalanced," << r.f_balanced << "," << r.r2_balanced << "\n";
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "balancing on a heavy-tailed synthetic dataset (%zu train / %zu val)\n"
                  "  unbalanced: F_0.05 %.3f  R2 %.3f\n"
                  "  balanced:   F_0.05 %.3f  R2 %.3f\n"
                  "  F_0.05 improvement: %.1f%%\n",
                  r.n_train, r.n_val, r.f_unbalanced, r.r2_unbalanced, r.f_balanced,
                  r.r2_balanced, r.f_improvement_percent);
    txt << buf;
    write_lines(csv_path(name), csv.str());
    write_lines(txt_path(name), txt.str());
    std::cout << txt.str();
  } else if (name == "nn-filter" || name == "alpha-sweep" || name == "mutation-ratio") {
    if (common.fitness_mode() != st::FitnessMode::work_units)
      throw st::ConfigError("bench " + name + " runs in work-units mode");
    std::cout << "building testbed: " << problem << ", " << (samples ? samples : 2000)
              << " samples\n";
    st::Testbed bed = st::make_testbed(problem, load_space_or_builtin(space_path),
                                       samples ? samples : 2000, common.seed + 3, common.jobs);
    std::printf("surrogate: R2 %.3f, F_0.05 %.3f on hold-out\n", bed.model_metrics.r_squared,
                bed.model_metrics.f_alpha.count(0.05) ? bed.model_metrics.f_alpha.at(0.05) : 0.0);
    std::ostringstream csv, txt;
    if (name == "nn-filter") {
      st::FilterComparison fc =
          st::nn_filter_experiment(bed, trials ? trials : 20, common.seed + 4);
      csv << head << "variant,mean,stddev,trials\n";
      csv << "with_filter," << fc.with_filter.mean << "," << fc.with_filter.stddev << ","
          << fc.with_filter.values.size() << "\n";
      csv << "without_filter," << fc.without_filter.mean << "," << fc.without_filter.stddev
          << "," << fc.without_filter.values.size() << "\n";
      char buf[320];
      std::snprintf(buf, sizeof(buf),
                    "NN pre-filter effect on optimized fitness (%zu trials each)\n"
                    "  with filter:    mean %.6g stddev %.6g\n"
                    "  without filter: mean %.6g stddev %.6g\n",
                    fc.with_filter.values.size(), fc.with_filter.mean, fc.with_filter.stddev,
                    fc.without_filter.mean, fc.without_filter.stddev);
      txt << buf;
    } else if (name == "alpha-sweep") {
      csv << head << "alpha,mean,stddev,trials\n";
      txt << "optimized fitness vs filter fraction alpha (0 = no filter)\n";
      for (const st::AlphaSweepRow& row : st::alpha_sweep_experiment(
               bed, {0.002, 0.01, 0.05, 0.2}, trials ? trials : 20, common.seed + 5)) {
        csv << row.alpha << "," << row.stats.mean << "," << row.stats.stddev << ","
            << row.stats.values.size() << "\n";
        char buf[96];
        std::snprintf(buf, sizeof(buf), "  alpha %6g: mean %.6g stddev %.6g\n", row.alpha,
                      row.stats.mean, row.stats.stddev);
        txt << buf;
      }
    } else {
      csv << head << "lambda_s,lambda_r,mean,stddev,mean_evaluations\n";
      txt << "optimized fitness vs soft/random mutation ratio\n";
      for (const st::MutationRatioRow& row :
           st::mutation_ratio_experiment(bed, trials ? trials : 10, common.seed + 6)) {
        csv << row.lambda_s << "," << row.lambda_r << "," << row.stats.mean << ","
            << row.stats.stddev << "," << row.mean_evaluations << "\n";
        char buf[112];
        std::snprintf(buf, sizeof(buf), "  S%d/R%d: mean %.6g stddev %.6g evals %.0f\n",
                      row.lambda_s, row.lambda_r, row.stats.mean, row.stats.stddev,
                      row.mean_evaluations);
        txt << buf;
      }
    }
    write_lines(csv_path(name), csv.str());
    write_lines(txt_path(name), txt.str());
    std::cout << txt.str();
  } else {
    throw st::ConfigError("unknown experiment '" + name +
                          "' (f-alpha-vs-nv | balancing | nn-filter | alpha-sweep | "
                          "mutation-ratio)");
  }
  print_manifest(manifest);
  std::cout << "reports in " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"solvertune: autotunes a BiCGStab+AMG solver with a hybrid evolution strategy"};
  app.require_subcommand(1);
  CommonOpts common;

  std::string problem_spec, space_path, data_path, model_path, config_path, rhs, out, trace_path,
      bench_name;
  std::size_t count = 0, samples = 0;
  double val_fraction = 0.1;
  bool force = false, unbalanced = false, no_default = false;
  int trials = 0;
  st::EsConfig es;

  auto add_common = [&](CLI::App* cmd, bool with_mode = true) {
    cmd->add_option("--seed", common.seed, "random seed")->capture_default_str();
    if (with_mode)
      cmd->add_option("--mode", common.mode, "fitness mode: work-units | wall-time")
          ->check(CLI::IsMember({"work-units", "wall-time"}))
          ->capture_default_str();
    cmd->add_option("--jobs", common.jobs, "worker threads (work-units mode only)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  };

  CLI::App* gen = app.add_subcommand("gen-problem", "generate a test system as .mtx + .rhs");
  gen->add_option("--spec", problem_spec, "problem spec: cube:N | jumps:N | mm:PATH")->required();
  gen->add_option("--rhs", rhs, "rhs kind: ones | divrand | file:PATH");
  gen->add_option("--out", out, "output base path (writes BASE.mtx, BASE.rhs)")->required();
  add_common(gen, false);

  CLI::App* sample = app.add_subcommand("sample", "evaluate random configurations into a dataset");
  sample->add_option("--problem", problem_spec, "problem spec")->required();
  sample->add_option("--space", space_path, "search space file (built-in space7 when omitted)");
  sample->add_option("--count", count, "number of samples")->required();
  sample->add_option("--out", out, "dataset file")->required();
  sample->add_flag("--force", force, "overwrite instead of resuming");
  add_common(sample);

  CLI::App* stats = app.add_subcommand("stats", "summarize a dataset file");
  stats->add_option("--data", data_path, "dataset file")->required();

  CLI::App* bal = app.add_subcommand("balance", "replace failures and the slow tail with Q3");
  bal->add_option("--data", data_path, "raw dataset file")->required();
  bal->add_option("--out", out, "output dataset file")->required();
  bal->add_flag("--unbalanced", unbalanced, "only replace failures, keep the finite tail");
  add_common(bal, false);

  CLI::App* train = app.add_subcommand("train", "train the regression surrogate on a dataset");
  train->add_option("--data", data_path, "balanced dataset file")->required();
  train->add_option("--space", space_path, "search space file (built-in space7 when omitted)");
  train->add_option("--val-fraction", val_fraction, "hold-out fraction")->capture_default_str();
  train->add_option("--out", out, "model file")->required();
  add_common(train, false);

  CLI::App* tune = app.add_subcommand("tune", "run the hybrid evolution strategy");
  tune->add_option("--problem", problem_spec, "problem spec")->required();
  tune->add_option("--space", space_path, "search space file (built-in space7 when omitted)");
  tune->add_option("--model", model_path, "surrogate model file (enables the NN filter)");
  tune->add_option("--out", out, "optimized config file")->required();
  tune->add_option("--trace", trace_path, "per-generation trace file");
  tune->add_option("--lambda-s", es.lambda_s, "soft mutations per generation")
      ->capture_default_str();
  tune->add_option("--lambda-r", es.lambda_r, "random mutations per generation")
      ->capture_default_str();
  tune->add_option("--alpha", es.alpha, "least-predicted fraction")->capture_default_str();
  tune->add_option("--pool", es.trial_pool, "trial pool size L")->capture_default_str();
  tune->add_option("--stall-window", es.stall_window, "stall window")->capture_default_str();
  tune->add_option("--max-generations", es.max_generations, "generation cap")
      ->capture_default_str();
  tune->add_flag("--no-default", no_default, "do not seed generation 0 with the default config");
  add_common(tune);

  CLI::App* solve = app.add_subcommand("solve", "solve one system with a given config");
  solve->add_option("--problem", problem_spec, "problem spec")->required();
  solve->add_option("--rhs", rhs, "rhs kind: ones | divrand | file:PATH");
  solve->add_option("--config", config_path, "solver config file (default config when omitted)");
  solve->add_option("--out", out, "write the solution vector here");
  add_common(solve, false);

  CLI::App* bench = app.add_subcommand("bench", "methodological experiments, reports + CSV");
  bench->add_option("name", bench_name,
                    "f-alpha-vs-nv | balancing | nn-filter | alpha-sweep | mutation-ratio")
      ->required();
  bench->add_option("--out", out, "report directory")->required();
  bench->add_option("--problem", problem_spec, "problem spec for solver-backed experiments")
      ->default_val("cube:16");
  bench->add_option("--space", space_path, "search space file (built-in space7 when omitted)");
  bench->add_option("--trials", trials, "trials per variant (0 = experiment default)");
  bench->add_option("--samples", samples, "dataset size (0 = experiment default)");
  add_common(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const std::string sub = app.get_subcommands().front()->get_name();
    st::RunManifest manifest =
        make_manifest(sub, argc, argv,
                      sub == "sample" || sub == "tune" || sub == "bench"
                          ? common.fitness_mode()
                          : st::FitnessMode::work_units,
                      common.seed);
    if (gen->parsed()) return cmd_gen_problem(problem_spec, rhs, out, common, manifest);
    if (sample->parsed())
      return cmd_sample(problem_spec, space_path, count, out, force, common, manifest);
    if (stats->parsed()) return cmd_stats(data_path);
    if (bal->parsed()) return cmd_balance(data_path, out, unbalanced, manifest);
    if (train->parsed())
      return cmd_train(data_path, space_path, val_fraction, out, common, manifest);
    if (tune->parsed()) {
      es.inject_default = !no_default;
      return cmd_tune(problem_spec, space_path, model_path, out, trace_path, es, common,
                      manifest);
    }
    if (solve->parsed()) return cmd_solve(problem_spec, rhs, config_path, out, common, manifest);
    if (bench->parsed())
      return cmd_bench(bench_name, out, problem_spec, space_path, trials, samples, common,
                       manifest);
    std::cerr << "no subcommand\n";
    return kExitConfig;
  } catch (const st::NoFeasibleConfig& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const st::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const st::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
