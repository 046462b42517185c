#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairpoison/common.hpp"

namespace fairpoison {

/// One labeled, group-annotated point. Labels and groups are binary {0,1};
/// label 1 is the positive class, group is the sensitive attribute.
struct Example {
  Vector features;
  int label = 0;
  int group = 0;
};

/// Immutable collection of examples with a fixed feature dimension.
/// Features are stored row-major-per-example in an n x dim matrix so that
/// whole-dataset operations stay single Eigen expressions.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Matrix features, IntVector labels, IntVector groups,
          std::string name = {});

  Index size() const { return features_.rows(); }
  Index dim() const { return features_.cols(); }
  bool empty() const { return size() == 0; }

  const Matrix& features() const { return features_; }
  const IntVector& labels() const { return labels_; }
  const IntVector& groups() const { return groups_; }
  const std::string& name() const { return name_; }

  auto row(Index i) const { return features_.row(i); }
  int label(Index i) const { return labels_[i]; }
  int group(Index i) const { return groups_[i]; }
  Example example(Index i) const;

  /// Column headers for CSV output; defaults to x0..x{dim-1} when unset.
  const std::vector<std::string>& feature_names() const;
  void set_feature_names(std::vector<std::string> names);
  void set_name(std::string name) { name_ = std::move(name); }

  static Dataset from_examples(std::span<const Example> examples, Index dim,
                               std::string name = {});

  /// New dataset holding rows `indices`, in the given order.
  Dataset select(std::span<const Index> indices, std::string name = {}) const;

  /// Row-wise concatenation; dimensions must agree. An empty operand acts as
  /// the identity.
  static Dataset concat(const Dataset& a, const Dataset& b,
                        std::string name = {});

 private:
  Matrix features_;
  IntVector labels_;
  IntVector groups_;
  std::string name_;
  mutable std::vector<std::string> feature_names_;
};

/// Per-(label, group) counts and error mass. `error_mass[y][s]` holds whatever
/// per-example quantity the caller accumulates over cell (y, s): 0/1
/// misprediction indicators for the exact equalized-odds gap, or linear losses
/// for the convex relaxation. Counts and mass support O(1) k-copy insertion of
/// a candidate point without rescanning the dataset.
struct SubgroupStats {
  std::array<std::array<std::int64_t, 2>, 2> count{};  // [y][s]
  std::array<std::array<double, 2>, 2> error_mass{};   // [y][s]

  std::int64_t total() const {
    return count[0][0] + count[0][1] + count[1][0] + count[1][1];
  }
  bool has_empty_cell() const {
    return count[0][0] == 0 || count[0][1] == 0 || count[1][0] == 0 ||
           count[1][1] == 0;
  }
  /// Mean error mass of cell (y, s); 0 for an empty cell (the degenerate-cell
  /// rule -- callers log the condition via metrics).
  double rate(int y, int s) const {
    return count[y][s] == 0 ? 0.0
                            : error_mass[y][s] / static_cast<double>(count[y][s]);
  }

  /// Counts only, zero mass.
  static SubgroupStats counts_of(const Dataset& data);
};

/// Fractions of the dataset per (y, s) cell; sums to 1.
/// Returned as fractions[y][s]. Throws DataError on an empty dataset.
std::array<std::array<double, 2>, 2> subgroup_distribution(const Dataset& data);

/// Three-way partition of {0..n-1}: seeded uniform shuffle, then contiguous
/// cut at boundaries rounded from the cumulative ratios. Deterministic for a
/// fixed seed; every index lands in exactly one part.
std::array<std::vector<Index>, 3> split_indices(Index n,
                                                const std::array<double, 3>& ratios,
                                                std::uint64_t seed);

/// The four working datasets of one experiment repetition. `attack` is the
/// full attack pool (easy attack rows followed by the hard rows); `hard`
/// duplicates the hard rows for the hard-examples baseline. The index vectors
/// form a pairwise-disjoint partition of the source dataset.
struct DataSplits {
  Dataset clean;   // D_c
  Dataset test;    // D_test
  Dataset attack;  // D_k = easy attack part + hard examples
  Dataset hard;    // filtered-out hard examples only

  std::vector<Index> clean_indices;
  std::vector<Index> test_indices;
  std::vector<Index> attack_easy_indices;
  std::vector<Index> hard_indices;
};

/// Splits the retained (easy) pool clean/test/attack by `ratios`, then appends
/// the hard pool to the attack set. `easy_indices`/`hard_indices` are row
/// indices into `source` identifying the two pools.
DataSplits make_splits(const Dataset& source,
                       std::span<const Index> easy_indices,
                       std::span<const Index> hard_indices,
                       const std::array<double, 3>& ratios, std::uint64_t seed);

}  // namespace fairpoison
