#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "solvertune/errors.hpp"

namespace solvertune {

enum class CycleType { V, W, F };
enum class CoarseningType { classical_rs, pmis_like };
enum class InterpType { direct, classical };

/// Tunable numerical stack configuration: BiCGStab outer iteration, classical
/// AMG preconditioner, Chebyshev smoothing, direct coarse solve. Defaults
/// mirror the shipped default.cfg.
struct SolverConfig {
  CycleType cycle = CycleType::V;
  int precond_iters = 1;
  double max_row_sum = 1.0;
  int coarse_matrix_size = 500;
  CoarseningType coarsening = CoarseningType::classical_rs;
  InterpType interpolation = InterpType::classical;
  double strength_threshold = 0.25;
  double trunc_factor = 0.5;
  int p_max_elements = 4;
  int pre_cheby_order = 2;
  double pre_spectrum_fraction = 0.3;
  int post_cheby_order = 2;
  double post_spectrum_fraction = 0.3;
  int outer_max_iters = 50;
  double outer_rel_tol = 1e-8;

  bool operator==(const SolverConfig&) const = default;

  void validate() const;
  std::string to_text() const;
  static SolverConfig from_text(const std::string& text, const std::string& name = "config");
  static SolverConfig from_file(const std::string& path);
};

inline SolverConfig default_config() { return SolverConfig{}; }

/// Reflection entry for one SolverConfig field. Enum fields expose their
/// labels and are carried as ordinals on the numeric side; this is what the
/// search space and the flat key=value format are built on.
struct ConfigField {
  std::string name;
  bool is_integer = false;  // integral-valued numeric field
  std::vector<std::string> labels;  // non-empty for enum fields
  std::function<double(const SolverConfig&)> get;
  std::function<void(SolverConfig&, double)> set;
  std::function<bool(double)> in_domain;
  bool is_enum() const { return !labels.empty(); }

  std::string format(double v) const {
    if (is_enum()) return labels.at(static_cast<std::size_t>(v));
    if (is_integer) return std::to_string(static_cast<long long>(v));
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }

  /// Parses a textual value into the numeric (ordinal) representation.
  double parse(const std::string& s) const {
    if (is_enum()) {
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == s) return static_cast<double>(i);
      throw ConfigError("parameter " + name + ": unknown value '" + s + "'");
    }
    try {
      std::size_t pos = 0;
      double v = std::stod(s, &pos);
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
      if (pos != s.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("parameter " + name + ": '" + s + "' is not a number");
    }
  }
};

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> f;
    auto in_range = [](double lo, double hi) {
      return [lo, hi](double v) { return v >= lo && v <= hi; };
    };
    auto int_in = [](double lo, double hi) {
      return [lo, hi](double v) { return v >= lo && v <= hi && v == std::floor(v); };
    };
    f.push_back({"cycle", false, {"V", "W", "F"},
                 [](const SolverConfig& c) { return static_cast<double>(c.cycle); },
                 [](SolverConfig& c, double v) { c.cycle = static_cast<CycleType>(int(v)); },
                 int_in(0, 2)});
    f.push_back({"precond_iters", true, {},
                 [](const SolverConfig& c) { return double(c.precond_iters); },
                 [](SolverConfig& c, double v) { c.precond_iters = int(v); }, int_in(1, 3)});
    f.push_back({"max_row_sum", false, {},
                 [](const SolverConfig& c) { return c.max_row_sum; },
                 [](SolverConfig& c, double v) { c.max_row_sum = v; },
                 [](double v) { return v > 0.0 && v <= 1.0; }});
    f.push_back({"coarse_matrix_size", true, {},
                 [](const SolverConfig& c) { return double(c.coarse_matrix_size); },
                 [](SolverConfig& c, double v) { c.coarse_matrix_size = int(v); },
                 int_in(1, 1e9)});
    f.push_back({"coarsening", false, {"classical_rs", "pmis_like"},
                 [](const SolverConfig& c) { return static_cast<double>(c.coarsening); },
                 [](SolverConfig& c, double v) { c.coarsening = static_cast<CoarseningType>(int(v)); },
                 int_in(0, 1)});
    f.push_back({"interpolation", false, {"direct", "classical"},
                 [](const SolverConfig& c) { return static_cast<double>(c.interpolation); },
                 [](SolverConfig& c, double v) { c.interpolation = static_cast<InterpType>(int(v)); },
                 int_in(0, 1)});
    f.push_back({"strength_threshold", false, {},
                 [](const SolverConfig& c) { return c.strength_threshold; },
                 [](SolverConfig& c, double v) { c.strength_threshold = v; }, in_range(0.0, 0.9)});
    f.push_back({"trunc_factor", false, {},
                 [](const SolverConfig& c) { return c.trunc_factor; },
                 [](SolverConfig& c, double v) { c.trunc_factor = v; }, in_range(0.0, 0.9)});
    f.push_back({"p_max_elements", true, {},
                 [](const SolverConfig& c) { return double(c.p_max_elements); },
                 [](SolverConfig& c, double v) { c.p_max_elements = int(v); }, int_in(0, 10)});
    f.push_back({"pre_cheby_order", true, {},
                 [](const SolverConfig& c) { return double(c.pre_cheby_order); },
                 [](SolverConfig& c, double v) { c.pre_cheby_order = int(v); }, int_in(1, 4)});
    f.push_back({"pre_spectrum_fraction", false, {},
                 [](const SolverConfig& c) { return c.pre_spectrum_fraction; },
                 [](SolverConfig& c, double v) { c.pre_spectrum_fraction = v; },
                 [](double v) { return v > 0.0 && v <= 0.9; }});
    f.push_back({"post_cheby_order", true, {},
                 [](const SolverConfig& c) { return double(c.post_cheby_order); },
                 [](SolverConfig& c, double v) { c.post_cheby_order = int(v); }, int_in(1, 4)});
    f.push_back({"post_spectrum_fraction", false, {},
                 [](const SolverConfig& c) { return c.post_spectrum_fraction; },
                 [](SolverConfig& c, double v) { c.post_spectrum_fraction = v; },
                 [](double v) { return v > 0.0 && v <= 0.9; }});
    f.push_back({"outer_max_iters", true, {},
                 [](const SolverConfig& c) { return double(c.outer_max_iters); },
                 [](SolverConfig& c, double v) { c.outer_max_iters = int(v); }, int_in(0, 1e9)});
    f.push_back({"outer_rel_tol", false, {},
                 [](const SolverConfig& c) { return c.outer_rel_tol; },
                 [](SolverConfig& c, double v) { c.outer_rel_tol = v; },
                 [](double v) { return v > 0.0 && v < 1.0; }});
    return f;
  }();
  return fields;
}

inline const ConfigField* find_config_field(const std::string& name) {
  for (const ConfigField& f : config_fields())
    if (f.name == name) return &f;
  return nullptr;
}

inline void SolverConfig::validate() const {
  for (const ConfigField& f : config_fields()) {
    const double v = f.get(*this);
    if (!f.in_domain(v))
      throw ConfigError("parameter " + f.name + ": value " + f.format(v) + " out of domain");
  }
}

inline std::string SolverConfig::to_text() const {
  std::ostringstream out;
  for (const ConfigField& f : config_fields())
    out << f.name << " = " << f.format(f.get(*this)) << "\n";
  return out.str();
}

inline SolverConfig SolverConfig::from_text(const std::string& text, const std::string& name) {
  SolverConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const char* ws = " \t\r";
      auto b = s.find_first_not_of(ws);
      if (b == std::string::npos) return std::string();
      auto e = s.find_last_not_of(ws);
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(name + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const ConfigField* field = find_config_field(key);
    if (!field)
      throw ConfigError(name + ":" + std::to_string(lineno) + ": unknown parameter '" + key + "'");
    field->set(cfg, field->parse(value));
  }
  cfg.validate();
  return cfg;
}

inline SolverConfig SolverConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), path);
}

}  // namespace solvertune
