#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fairpoison {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;
using Index = Eigen::Index;

/// Invalid configuration (bad hyperparameters, malformed config file).
/// Maps to CLI exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent data (bad CSV, empty dataset, degenerate cell).
/// Maps to CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure (divergent training, infeasible/unbounded LP).
/// Maps to CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Derives a child seed from a master seed and a string key.
/// Stable across runs and platforms; used to key RNG streams by grid cell so
/// results do not depend on scheduling or evaluation order.
std::uint64_t derive_seed(std::uint64_t master, std::string_view key);

}  // namespace fairpoison
