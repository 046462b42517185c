#include "fairpoison/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>

namespace fairpoison {

CellGaussian CellGaussian::isotropic(Vector mean, double variance) {
  const Index d = mean.size();
  return CellGaussian{std::move(mean),
                      Matrix::Identity(d, d) * variance};
}

void SyntheticSpec::validate() const {
  if (n <= 0) throw ConfigError("synthetic: n must be positive");
  if (dim <= 0) throw ConfigError("synthetic: dim must be positive");
  if (std::abs(group_fraction[0] + group_fraction[1] - 1.0) > 1e-9 ||
      group_fraction[0] < 0 || group_fraction[1] < 0)
    throw ConfigError("synthetic: group fractions must be nonnegative and sum to 1");
  for (double r : positive_rate)
    if (r < 0.0 || r > 1.0)
      throw ConfigError("synthetic: positive rates must be in [0,1]");
  for (int y = 0; y < 2; ++y)
    for (int s = 0; s < 2; ++s) {
      const CellGaussian& g = cell[y][s];
      if (g.mean.size() != dim)
        throw ConfigError("synthetic: cell mean dimension mismatch");
      if (g.covariance.rows() != dim || g.covariance.cols() != dim)
        throw ConfigError("synthetic: cell covariance dimension mismatch");
      if (Eigen::LLT<Matrix>(g.covariance).info() != Eigen::Success)
        throw ConfigError("synthetic: cell covariance not positive-definite");
    }
}

namespace {

// Largest-remainder rounding of n * fractions to counts summing to n.
std::array<Index, 4> stratified_counts(Index n,
                                       const std::array<double, 4>& fractions) {
  std::array<Index, 4> counts{};
  std::array<double, 4> remainders{};
  Index assigned = 0;
  for (int c = 0; c < 4; ++c) {
    const double target = static_cast<double>(n) * fractions[c];
    counts[c] = static_cast<Index>(std::floor(target));
    remainders[c] = target - std::floor(target);
    assigned += counts[c];
  }
  std::array<int, 4> order{0, 1, 2, 3};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (remainders[a] != remainders[b]) return remainders[a] > remainders[b];
    return a < b;
  });
  for (int i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % 4]];
  return counts;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();

  const std::array<double, 4> fractions = {
      spec.group_fraction[0] * (1.0 - spec.positive_rate[0]),  // (y=0, s=0)
      spec.group_fraction[1] * (1.0 - spec.positive_rate[1]),  // (y=0, s=1)
      spec.group_fraction[0] * spec.positive_rate[0],          // (y=1, s=0)
      spec.group_fraction[1] * spec.positive_rate[1],          // (y=1, s=1)
  };
  const std::array<Index, 4> counts = stratified_counts(spec.n, fractions);

  const Index dim = spec.dim + (spec.group_in_features ? 1 : 0);
  Matrix features(spec.n, dim);
  IntVector labels(spec.n);
  IntVector groups(spec.n);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Index row = 0;
  for (int c = 0; c < 4; ++c) {
    const int y = c / 2;
    const int s = c % 2;
    const CellGaussian& g = spec.cell[y][s];
    const Matrix chol = Eigen::LLT<Matrix>(g.covariance).matrixL();
    for (Index i = 0; i < counts[static_cast<std::size_t>(c)]; ++i, ++row) {
      Vector z(spec.dim);
      for (Index j = 0; j < spec.dim; ++j) z[j] = gauss(rng);
      features.row(row).head(spec.dim) = (g.mean + chol * z).transpose();
      if (spec.group_in_features) features(row, spec.dim) = s;
      labels[row] = y;
      groups[row] = s;
    }
  }

  Dataset data(std::move(features), std::move(labels), std::move(groups),
               spec.name);
  std::vector<std::string> names;
  for (Index j = 0; j < spec.dim; ++j) names.push_back("x" + std::to_string(j));
  if (spec.group_in_features) names.push_back("s");
  data.set_feature_names(std::move(names));
  return data;
}

}  // namespace fairpoison
