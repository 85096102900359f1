#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "solvertune/errors.hpp"
#include "solvertune/manifest.hpp"
#include "solvertune/matrix_market.hpp"
#include "solvertune/param_space.hpp"
#include "solvertune/rng.hpp"

namespace solvertune {

enum class FitnessMode { wall_time, work_units };

inline const char* to_string(FitnessMode m) {
  return m == FitnessMode::wall_time ? "wall-time" : "work-units";
}
inline FitnessMode fitness_mode_from(const std::string& s) {
  if (s == "wall-time" || s == "wall_time") return FitnessMode::wall_time;
  if (s == "work-units" || s == "work_units") return FitnessMode::work_units;
  throw ConfigError("unknown fitness mode '" + s + "'");
}

enum class DatasetStage { raw, unbalanced, balanced };

inline const char* to_string(DatasetStage s) {
  switch (s) {
    case DatasetStage::raw: return "raw";
    case DatasetStage::unbalanced: return "unbalanced";
    default: return "balanced";
  }
}
inline DatasetStage dataset_stage_from(const std::string& s) {
  if (s == "raw") return DatasetStage::raw;
  if (s == "unbalanced") return DatasetStage::unbalanced;
  if (s == "balanced") return DatasetStage::balanced;
  throw ConfigError("unknown dataset stage '" + s + "'");
}

/// One (vector, fitness) observation. Non-converged runs carry +inf.
struct FitnessSample {
  ParameterVector vector;
  double value = std::numeric_limits<double>::infinity();
  bool converged = false;
};

struct Dataset {
  std::uint64_t space_fingerprint = 0;
  std::size_t dims = 0;
  FitnessMode mode = FitnessMode::work_units;
  DatasetStage stage = DatasetStage::raw;
  double q3 = std::numeric_limits<double>::quiet_NaN();  // set once balanced/unbalanced
  std::string problem;
  std::uint64_t seed = 0;
  std::vector<FitnessSample> samples;

  std::size_t size() const { return samples.size(); }
};

/// Type-7 quantile (linear interpolation between order statistics).
inline double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw ConfigError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - std::floor(h)) * (values[lo + 1] - values[lo]);
}

namespace dataset_detail {

inline std::vector<double> finite_values(const Dataset& d) {
  std::vector<double> v;
  v.reserve(d.samples.size());
  for (const FitnessSample& s : d.samples)
    if (std::isfinite(s.value)) v.push_back(s.value);
  return v;
}

inline double upper_quartile_or_stored(const Dataset& d) {
  if (std::isfinite(d.q3)) return d.q3;
  std::vector<double> finite = finite_values(d);
  if (finite.size() < 4)
    throw ConfigError("balancing needs at least 4 finite samples, got " +
                      std::to_string(finite.size()));
  return quantile_type7(std::move(finite), 0.75);
}

}  // namespace dataset_detail

/// Balancing: finite values above Q3 and all infinite values become Q3.
/// Idempotent — an already balanced dataset passes through unchanged, and a
/// previously computed Q3 is reused rather than re-estimated on clipped data.
inline Dataset balance(const Dataset& d) {
  if (d.stage == DatasetStage::balanced) return d;
  Dataset out = d;
  const double q3 = dataset_detail::upper_quartile_or_stored(d);
  for (FitnessSample& s : out.samples)
    if (!std::isfinite(s.value) || s.value > q3) s.value = q3;
  out.q3 = q3;
  out.stage = DatasetStage::balanced;
  return out;
}

/// The paper's intermediate stage: non-converged (infinite) samples are
/// replaced by Q3, the heavy finite tail is kept.
inline Dataset make_unbalanced(const Dataset& d) {
  if (d.stage != DatasetStage::raw) return d;
  Dataset out = d;
  const double q3 = dataset_detail::upper_quartile_or_stored(d);
  for (FitnessSample& s : out.samples)
    if (!std::isfinite(s.value)) s.value = q3;
  out.q3 = q3;
  out.stage = DatasetStage::unbalanced;
  return out;
}

/// Hold-out split by seeded permutation: (train, validation), disjoint,
/// union preserving. Re-splitting with fresh seeds is the cross-validation.
inline std::pair<Dataset, Dataset> split(const Dataset& d, double validation_fraction, Rng& rng) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation fraction must be in (0, 1)");
  const std::size_t n = d.samples.size();
  const std::size_t n_val =
      static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n)
    throw ConfigError("validation fraction " + std::to_string(validation_fraction) +
                      " leaves an empty side for " + std::to_string(n) + " samples");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  Dataset train = d, val = d;
  train.samples.clear();
  val.samples.clear();
  for (std::size_t i = 0; i < n - n_val; ++i) train.samples.push_back(d.samples[order[i]]);
  for (std::size_t i = n - n_val; i < n; ++i) val.samples.push_back(d.samples[order[i]]);
  return {std::move(train), std::move(val)};
}

struct DatasetStats {
  std::size_t total = 0;
  std::size_t finite = 0;
  double non_converged_fraction = 0.0;
  double min = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double q3 = std::numeric_limits<double>::quiet_NaN();
};

inline DatasetStats dataset_stats(const Dataset& d) {
  DatasetStats st;
  st.total = d.samples.size();
  std::vector<double> finite = dataset_detail::finite_values(d);
  st.finite = finite.size();
  st.non_converged_fraction =
      st.total == 0 ? 0.0 : 1.0 - static_cast<double>(st.finite) / static_cast<double>(st.total);
  if (!finite.empty()) {
    st.min = *std::min_element(finite.begin(), finite.end());
    st.median = quantile_type7(finite, 0.5);
    if (finite.size() >= 4) st.q3 = quantile_type7(finite, 0.75);
  }
  return st;
}

// --------------------------------------------------------------------------
// dataset file: '#' header lines, then one sample per line:
//   <dims indices> <value|inf> <0|1>

inline void save_dataset(const Dataset& d, std::ostream& out, const RunManifest* manifest = nullptr) {
  out << "# solvertune dataset v1\n";
  if (manifest) out << manifest->render("# ");
  out << "# space: " << fingerprint_hex(d.space_fingerprint) << "\n";
  out << "# dims: " << d.dims << "\n";
  out << "# mode: " << to_string(d.mode) << "\n";
  out << "# stage: " << to_string(d.stage) << "\n";
  if (!d.problem.empty()) out << "# problem: " << d.problem << "\n";
  out << "# seed: " << d.seed << "\n";
  out << "# count: " << d.samples.size() << "\n";
  if (std::isfinite(d.q3)) out << "# q3: " << detail::format_double(d.q3) << "\n";
  for (const FitnessSample& s : d.samples) {
    for (int i : s.vector.indices) out << i << " ";
    if (std::isfinite(s.value))
      out << detail::format_double(s.value);
    else
      out << "inf";
    out << " " << (s.converged ? 1 : 0) << "\n";
  }
}

inline void save_dataset(const Dataset& d, const std::string& path,
                         const RunManifest* manifest = nullptr) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file: " + path);
  save_dataset(d, out, manifest);
}

inline Dataset load_dataset(std::istream& in, const std::string& name) {
  Dataset d;
  bool have_dims = false;
  std::string line;
  std::size_t lineno = 0;
  while (in.peek() == '#' && std::getline(in, line)) {
    ++lineno;
    const std::string body = line.substr(1);
    auto colon = body.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = space_detail::trim(body.substr(0, colon));
    const std::string value = space_detail::trim(body.substr(colon + 1));
    if (key == "space") d.space_fingerprint = std::stoull(value, nullptr, 16);
    else if (key == "dims") { d.dims = std::stoull(value); have_dims = true; }
    else if (key == "mode") d.mode = fitness_mode_from(value);
    else if (key == "stage") d.stage = dataset_stage_from(value);
    else if (key == "problem") d.problem = value;
    else if (key == "seed") d.seed = std::stoull(value);
    else if (key == "q3") d.q3 = std::stod(value);
  }
  if (!have_dims) throw ConfigError(name + ": missing '# dims:' header");
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    FitnessSample s;
    s.vector.indices.resize(d.dims);
    for (std::size_t j = 0; j < d.dims; ++j)
      if (!(ss >> s.vector.indices[j]))
        throw ConfigError(name + ":" + std::to_string(lineno) + ": truncated sample line");
    std::string value;
    int flag = 0;
    if (!(ss >> value >> flag))
      throw ConfigError(name + ":" + std::to_string(lineno) + ": truncated sample line");
    s.value = value == "inf" ? std::numeric_limits<double>::infinity() : std::stod(value);
    s.converged = flag != 0;
    d.samples.push_back(std::move(s));
  }
  return d;
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);
  return load_dataset(in, path);
}

}  // namespace solvertune
