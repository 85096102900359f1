#pragma once

#include <stdexcept>
#include <string>

namespace solvertune {

/// Bad user input: malformed files, invalid parameter values, off-grid configs.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem-level failures (missing files, unwritable paths).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical setup failure inside the solver stack (singular coarse operator,
/// blown-up hierarchy, non-SPD smoother bounds). The evaluator converts these
/// into infinite-fitness results.
struct SolverSetupError : std::runtime_error {
  explicit SolverSetupError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace solvertune
