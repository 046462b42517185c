#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "fairpoison/common.hpp"
#include "fairpoison/dataset.hpp"

namespace fairpoison {

/// Class-conditional Gaussian for one (label, group) cell. The covariance may
/// be any positive-definite matrix; diagonal is the common case.
struct CellGaussian {
  Vector mean;
  Matrix covariance;

  static CellGaussian isotropic(Vector mean, double variance);
};

/// Group-structured mixture of per-cell Gaussians. Cell targets are
/// n * group_fraction[s] * rate, with rate = positive_rate[s] for y = 1;
/// realized counts are the exact rounded targets (stratified, not
/// multinomial). With `group_in_features` the group indicator is appended as
/// the last feature column, so the sensitive attribute is part of the
/// feature vector.
struct SyntheticSpec {
  Index n = 0;
  Index dim = 2;  // Gaussian feature dimensions (indicator excluded)
  std::array<double, 2> group_fraction{0.5, 0.5};
  std::array<double, 2> positive_rate{0.5, 0.5};  // P(y = 1 | s)
  std::array<std::array<CellGaussian, 2>, 2> cell;  // [y][s]
  bool group_in_features = true;
  std::string name = "synthetic";

  void validate() const;
};

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace fairpoison
