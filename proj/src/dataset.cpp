#include "fairpoison/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fairpoison {

std::uint64_t derive_seed(std::uint64_t master, std::string_view key) {
  // FNV-1a over the key, mixed with the master seed and finalized
  // splitmix64-style.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = master ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Dataset::Dataset(Matrix features, IntVector labels, IntVector groups,
                 std::string name)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      groups_(std::move(groups)),
      name_(std::move(name)) {
  if (labels_.size() != features_.rows() || groups_.size() != features_.rows())
    throw DataError("dataset: labels/groups size does not match feature rows");
  for (Index i = 0; i < labels_.size(); ++i) {
    if (labels_[i] != 0 && labels_[i] != 1)
      throw DataError("dataset: invalid label " + std::to_string(labels_[i]) +
                      " at row " + std::to_string(i));
    if (groups_[i] != 0 && groups_[i] != 1)
      throw DataError("dataset: invalid group " + std::to_string(groups_[i]) +
                      " at row " + std::to_string(i));
  }
  if (!features_.allFinite())
    throw DataError("dataset: non-finite feature value");
}

Example Dataset::example(Index i) const {
  return Example{features_.row(i).transpose(), labels_[i], groups_[i]};
}

const std::vector<std::string>& Dataset::feature_names() const {
  if (feature_names_.empty() && dim() > 0) {
    feature_names_.reserve(static_cast<std::size_t>(dim()));
    for (Index j = 0; j < dim(); ++j)
      feature_names_.push_back("x" + std::to_string(j));
  }
  return feature_names_;
}

void Dataset::set_feature_names(std::vector<std::string> names) {
  if (!names.empty() && static_cast<Index>(names.size()) != dim())
    throw DataError("dataset: feature name count does not match dimension");
  feature_names_ = std::move(names);
}

Dataset Dataset::from_examples(std::span<const Example> examples, Index dim,
                               std::string name) {
  Matrix features(static_cast<Index>(examples.size()), dim);
  IntVector labels(static_cast<Index>(examples.size()));
  IntVector groups(static_cast<Index>(examples.size()));
  for (Index i = 0; i < static_cast<Index>(examples.size()); ++i) {
    const Example& e = examples[static_cast<std::size_t>(i)];
    if (e.features.size() != dim)
      throw DataError("dataset: example dimension mismatch at row " +
                      std::to_string(i));
    features.row(i) = e.features.transpose();
    labels[i] = e.label;
    groups[i] = e.group;
  }
  return Dataset(std::move(features), std::move(labels), std::move(groups),
                 std::move(name));
}

Dataset Dataset::select(std::span<const Index> indices,
                        std::string name) const {
  Matrix features(static_cast<Index>(indices.size()), dim());
  IntVector labels(static_cast<Index>(indices.size()));
  IntVector groups(static_cast<Index>(indices.size()));
  for (Index i = 0; i < static_cast<Index>(indices.size()); ++i) {
    const Index src = indices[static_cast<std::size_t>(i)];
    if (src < 0 || src >= size())
      throw DataError("dataset: select index out of range");
    features.row(i) = features_.row(src);
    labels[i] = labels_[src];
    groups[i] = groups_[src];
  }
  Dataset out(std::move(features), std::move(labels), std::move(groups),
              std::move(name));
  out.feature_names_ = feature_names_;
  return out;
}

Dataset Dataset::concat(const Dataset& a, const Dataset& b, std::string name) {
  if (a.empty() && b.empty()) return Dataset();
  if (a.empty()) {
    Dataset out = b;
    out.set_name(std::move(name));
    return out;
  }
  if (b.empty()) {
    Dataset out = a;
    out.set_name(std::move(name));
    return out;
  }
  if (a.dim() != b.dim())
    throw DataError("dataset: concat dimension mismatch");
  Matrix features(a.size() + b.size(), a.dim());
  features << a.features_, b.features_;
  IntVector labels(a.size() + b.size());
  labels << a.labels_, b.labels_;
  IntVector groups(a.size() + b.size());
  groups << a.groups_, b.groups_;
  Dataset out(std::move(features), std::move(labels), std::move(groups),
              std::move(name));
  out.feature_names_ = a.feature_names_;
  return out;
}

SubgroupStats SubgroupStats::counts_of(const Dataset& data) {
  SubgroupStats stats;
  for (Index i = 0; i < data.size(); ++i)
    ++stats.count[data.label(i)][data.group(i)];
  return stats;
}

std::array<std::array<double, 2>, 2> subgroup_distribution(
    const Dataset& data) {
  if (data.empty()) throw DataError("subgroup_distribution: empty dataset");
  const SubgroupStats stats = SubgroupStats::counts_of(data);
  const double n = static_cast<double>(data.size());
  std::array<std::array<double, 2>, 2> fractions{};
  for (int y = 0; y < 2; ++y)
    for (int s = 0; s < 2; ++s)
      fractions[y][s] = static_cast<double>(stats.count[y][s]) / n;
  return fractions;
}

std::array<std::vector<Index>, 3> split_indices(
    Index n, const std::array<double, 3>& ratios, std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (!(total > 0) || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0)
    throw ConfigError("split: ratios must be nonnegative with positive sum");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // Boundaries from rounded cumulative ratios; the last part absorbs the
  // remainder so the cut always covers all n indices.
  const auto boundary = [&](double cum) {
    const Index b = static_cast<Index>(std::llround(static_cast<double>(n) * cum / total));
    return std::clamp<Index>(b, 0, n);
  };
  Index b1 = boundary(ratios[0]);
  Index b2 = std::max(b1, boundary(ratios[0] + ratios[1]));

  std::array<std::vector<Index>, 3> parts;
  parts[0].assign(order.begin(), order.begin() + b1);
  parts[1].assign(order.begin() + b1, order.begin() + b2);
  parts[2].assign(order.begin() + b2, order.end());
  return parts;
}

DataSplits make_splits(const Dataset& source,
                       std::span<const Index> easy_indices,
                       std::span<const Index> hard_indices,
                       const std::array<double, 3>& ratios,
                       std::uint64_t seed) {
  const auto parts = split_indices(static_cast<Index>(easy_indices.size()),
                                   ratios, seed);

  DataSplits splits;
  const auto to_source = [&](const std::vector<Index>& local) {
    std::vector<Index> out;
    out.reserve(local.size());
    for (Index i : local) out.push_back(easy_indices[static_cast<std::size_t>(i)]);
    return out;
  };
  splits.clean_indices = to_source(parts[0]);
  splits.test_indices = to_source(parts[1]);
  splits.attack_easy_indices = to_source(parts[2]);
  splits.hard_indices.assign(hard_indices.begin(), hard_indices.end());

  splits.clean = source.select(splits.clean_indices, "clean");
  splits.test = source.select(splits.test_indices, "test");
  splits.hard = source.select(splits.hard_indices, "hard");
  Dataset attack_easy = source.select(splits.attack_easy_indices, "attack");
  splits.attack = Dataset::concat(attack_easy, splits.hard, "attack");
  return splits;
}

}  // namespace fairpoison
