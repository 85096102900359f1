#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "solvertune/errors.hpp"
#include "solvertune/rng.hpp"
#include "solvertune/solver_config.hpp"

namespace solvertune {

using big_uint = boost::multiprecision::cpp_int;

enum class SpecKind { continuous_range, discrete_range, discrete_list };

/// One tunable parameter: its grid of allowed values in index order. Enum
/// parameters carry label strings; numeric grids carry the concrete values.
struct ParameterSpec {
  std::string name;
  SpecKind kind = SpecKind::discrete_list;
  double lo = 0.0, hi = 0.0, step = 0.0;  // continuous_range / discrete_range
  std::vector<double> values;             // K_j grid values (ordinals for enums)
  std::vector<std::string> labels;        // enum labels, empty otherwise

  std::size_t size() const { return values.size(); }

  std::string format_value(std::size_t index) const {
    if (!labels.empty()) return labels.at(index);
    const ConfigField* f = find_config_field(name);
    if (f) return f->format(values.at(index));
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", values.at(index));
    return buf;
  }
};

/// Point in the search space: one grid index per tunable parameter.
struct ParameterVector {
  std::vector<int> indices;

  bool operator==(const ParameterVector&) const = default;
  auto operator<=>(const ParameterVector&) const = default;
};

struct ParameterVectorHash {
  std::size_t operator()(const ParameterVector& v) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (int i : v.indices) {
      h ^= static_cast<std::uint64_t>(i) + 0x9E3779B97F4A7C15ull;
      h *= 0x100000001b3ull;
    }
    return static_cast<std::size_t>(h);
  }
};

/// Discretized search space over SolverConfig: an ordered list of tunable
/// parameter grids plus frozen values for everything else. Every
/// SolverConfig field must appear exactly once.
class SearchSpace {
 public:
  std::vector<ParameterSpec> specs;
  std::map<std::string, double> frozen;

  std::size_t dims() const { return specs.size(); }

  void validate() const {
    std::map<std::string, int> seen;
    for (const ParameterSpec& s : specs) ++seen[s.name];
    for (const auto& [name, value] : frozen) ++seen[name];
    for (const ConfigField& f : config_fields()) {
      auto it = seen.find(f.name);
      if (it == seen.end())
        throw ConfigError("search space: parameter '" + f.name + "' is neither tuned nor frozen");
      if (it->second > 1)
        throw ConfigError("search space: parameter '" + f.name + "' appears more than once");
      seen.erase(it);
    }
    if (!seen.empty())
      throw ConfigError("search space: unknown parameter '" + seen.begin()->first + "'");
    for (const ParameterSpec& s : specs) {
      if (s.values.empty())
        throw ConfigError("search space: parameter '" + s.name + "' has an empty grid");
      const ConfigField* f = find_config_field(s.name);
      for (double v : s.values)
        if (!f->in_domain(v))
          throw ConfigError("search space: parameter '" + s.name + "' grid value " +
                            f->format(v) + " out of domain");
    }
    for (const auto& [name, value] : frozen) {
      const ConfigField* f = find_config_field(name);
      if (!f->in_domain(value))
        throw ConfigError("search space: frozen parameter '" + name + "' value " +
                          f->format(value) + " out of domain");
    }
  }

  /// Canonical serialization: spec order defines the vector layout, frozen
  /// fields sorted by name. Also the fingerprint input.
  std::string canonical_text() const {
    std::ostringstream out;
    for (const ParameterSpec& s : specs) {
      out << s.name << ":";
      for (std::size_t i = 0; i < s.values.size(); ++i) out << " " << s.format_value(i);
      out << "\n";
    }
    for (const auto& [name, value] : frozen) {
      const ConfigField* f = find_config_field(name);
      out << name << " frozen " << (f ? f->format(value) : std::to_string(value)) << "\n";
    }
    return out.str();
  }

  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canonical_text()) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

  static SearchSpace from_text(const std::string& text, const std::string& name = "space");
  static SearchSpace from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open space file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str(), path);
  }
  std::string to_text() const;
};

inline std::string fingerprint_hex(std::uint64_t fp) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

/// Exact number of grid points, arbitrary precision.
inline big_uint cardinality(const SearchSpace& space) {
  big_uint k = 1;
  for (const ParameterSpec& s : space.specs) k *= static_cast<unsigned long long>(s.size());
  return k;
}

inline void check_vector(const SearchSpace& space, const ParameterVector& v) {
  if (v.indices.size() != space.dims())
    throw ConfigError("parameter vector has " + std::to_string(v.indices.size()) +
                      " entries, space has " + std::to_string(space.dims()));
  for (std::size_t j = 0; j < space.dims(); ++j)
    if (v.indices[j] < 0 || static_cast<std::size_t>(v.indices[j]) >= space.specs[j].size())
      throw ConfigError("parameter vector index out of range for '" + space.specs[j].name + "'");
}

inline SolverConfig decode(const SearchSpace& space, const ParameterVector& v) {
  check_vector(space, v);
  SolverConfig cfg;
  for (const auto& [name, value] : space.frozen) find_config_field(name)->set(cfg, value);
  for (std::size_t j = 0; j < space.dims(); ++j) {
    const ParameterSpec& s = space.specs[j];
    find_config_field(s.name)->set(cfg, s.values[static_cast<std::size_t>(v.indices[j])]);
  }
  cfg.validate();
  return cfg;
}

/// Inverse of decode for on-grid configs; off-grid or frozen-mismatched
/// values raise ConfigError naming the parameter.
inline ParameterVector encode(const SearchSpace& space, const SolverConfig& cfg) {
  auto close = [](double a, double b) {
    return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)});
  };
  for (const auto& [name, value] : space.frozen) {
    const double actual = find_config_field(name)->get(cfg);
    if (!close(actual, value))
      throw ConfigError("encode: parameter '" + name + "' is frozen at " +
                        find_config_field(name)->format(value) + " but config has " +
                        find_config_field(name)->format(actual));
  }
  ParameterVector v;
  v.indices.reserve(space.dims());
  for (const ParameterSpec& s : space.specs) {
    const double actual = find_config_field(s.name)->get(cfg);
    int found = -1;
    for (std::size_t i = 0; i < s.values.size(); ++i)
      if (close(actual, s.values[i])) {
        found = static_cast<int>(i);
        break;
      }
    if (found < 0)
      throw ConfigError("encode: parameter '" + s.name + "' value " +
                        find_config_field(s.name)->format(actual) + " is not on the grid");
    v.indices.push_back(found);
  }
  return v;
}

inline ParameterVector random_vector(const SearchSpace& space, Rng& rng) {
  ParameterVector v;
  v.indices.reserve(space.dims());
  for (const ParameterSpec& s : space.specs)
    v.indices.push_back(static_cast<int>(rng.below(s.size())));
  return v;
}

struct MutationProbs {
  double stay = 0.5;  // remaining mass splits evenly between +1 and -1 steps
};

/// Soft mutation: per coordinate, one grid step up/down or stay, clamped at
/// the grid ends.
inline ParameterVector soft_mutate(const SearchSpace& space, const ParameterVector& v, Rng& rng,
                                   MutationProbs probs = {}) {
  check_vector(space, v);
  ParameterVector out = v;
  for (std::size_t j = 0; j < space.dims(); ++j) {
    const double u = rng.real01();
    int step = 0;
    if (u >= probs.stay) step = u < probs.stay + (1.0 - probs.stay) / 2.0 ? 1 : -1;
    const int hi = static_cast<int>(space.specs[j].size()) - 1;
    out.indices[j] = std::clamp(out.indices[j] + step, 0, hi);
  }
  return out;
}

/// Grid coordinates scaled to [0,1] per axis (0 when the axis is a single
/// point); the network input encoding.
inline std::vector<double> normalize(const SearchSpace& space, const ParameterVector& v) {
  check_vector(space, v);
  std::vector<double> x(space.dims());
  for (std::size_t j = 0; j < space.dims(); ++j) {
    const std::size_t k = space.specs[j].size();
    x[j] = k <= 1 ? 0.0 : static_cast<double>(v.indices[j]) / static_cast<double>(k - 1);
  }
  return x;
}

// ---------------------------------------------------------------------------
// space file format: one parameter per line,
//   name : range(lo, hi, step) | ints(lo, hi) | list(v1, v2, ...) | frozen(v)
// '#' starts a comment.

namespace space_detail {

inline std::string trim(const std::string& s) {
  const char* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_args(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !parts.empty()) parts.push_back(trim(cur));
  return parts;
}

inline double parse_number(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(context + ": '" + s + "' is not a number");
  }
}

}  // namespace space_detail

inline SearchSpace SearchSpace::from_text(const std::string& text, const std::string& name) {
  using space_detail::parse_number;
  using space_detail::split_args;
  using space_detail::trim;
  SearchSpace space;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    auto colon = line.find(':');
    if (colon == std::string::npos) throw ConfigError(where + ": expected 'name : kind(...)'");
    const std::string pname = trim(line.substr(0, colon));
    const ConfigField* field = find_config_field(pname);
    if (!field) throw ConfigError(where + ": unknown parameter '" + pname + "'");
    std::string rhs = trim(line.substr(colon + 1));
    auto open = rhs.find('(');
    auto close = rhs.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open)
      throw ConfigError(where + ": expected 'kind(args)'");
    const std::string kind = trim(rhs.substr(0, open));
    const std::vector<std::string> args = split_args(rhs.substr(open + 1, close - open - 1));

    auto parse_field_value = [&](const std::string& s) {
      if (field->is_enum()) return field->parse(s);
      return parse_number(s, where);
    };

    if (kind == "frozen") {
      if (args.size() != 1) throw ConfigError(where + ": frozen takes one value");
      if (!space.frozen.emplace(pname, parse_field_value(args[0])).second)
        throw ConfigError(where + ": parameter '" + pname + "' appears more than once");
      continue;
    }
    ParameterSpec spec;
    spec.name = pname;
    if (kind == "range") {
      if (args.size() != 3) throw ConfigError(where + ": range takes (lo, hi, step)");
      spec.kind = SpecKind::continuous_range;
      spec.lo = parse_number(args[0], where);
      spec.hi = parse_number(args[1], where);
      spec.step = parse_number(args[2], where);
      if (spec.step <= 0.0 || spec.hi < spec.lo)
        throw ConfigError(where + ": range requires step > 0 and hi >= lo");
      for (double v = spec.lo; v <= spec.hi + 1e-9 * spec.step;) {
        spec.values.push_back(std::min(v, spec.hi));
        v += spec.step;
      }
    } else if (kind == "ints") {
      if (args.size() != 2) throw ConfigError(where + ": ints takes (lo, hi)");
      spec.kind = SpecKind::discrete_range;
      spec.lo = parse_number(args[0], where);
      spec.hi = parse_number(args[1], where);
      if (spec.lo != std::floor(spec.lo) || spec.hi != std::floor(spec.hi) || spec.hi < spec.lo)
        throw ConfigError(where + ": ints requires integers with hi >= lo");
      for (double v = spec.lo; v <= spec.hi; v += 1.0) spec.values.push_back(v);
    } else if (kind == "list") {
      if (args.empty() || (args.size() == 1 && args[0].empty()))
        throw ConfigError(where + ": list requires at least one value");
      spec.kind = SpecKind::discrete_list;
      for (const std::string& s : args) {
        spec.values.push_back(parse_field_value(s));
        if (field->is_enum()) spec.labels.push_back(s);
      }
    } else {
      throw ConfigError(where + ": unknown kind '" + kind + "'");
    }
    space.specs.push_back(std::move(spec));
  }
  space.validate();
  return space;
}

inline std::string SearchSpace::to_text() const {
  std::ostringstream out;
  for (const ParameterSpec& s : specs) {
    out << s.name << " : ";
    switch (s.kind) {
      case SpecKind::continuous_range: {
        const ConfigField* f = find_config_field(s.name);
        out << "range(" << f->format(s.lo) << ", " << f->format(s.hi) << ", " << f->format(s.step)
            << ")";
        break;
      }
      case SpecKind::discrete_range:
        out << "ints(" << static_cast<long long>(s.lo) << ", " << static_cast<long long>(s.hi)
            << ")";
        break;
      case SpecKind::discrete_list: {
        out << "list(";
        for (std::size_t i = 0; i < s.values.size(); ++i)
          out << (i ? ", " : "") << s.format_value(i);
        out << ")";
        break;
      }
    }
    out << "\n";
  }
  for (const auto& [name, value] : frozen)
    out << name << " : frozen(" << find_config_field(name)->format(value) << ")\n";
  return out.str();
}

}  // namespace solvertune
