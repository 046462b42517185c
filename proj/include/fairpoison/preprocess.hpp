#pragma once

#include <vector>

#include "fairpoison/common.hpp"
#include "fairpoison/dataset.hpp"
#include "fairpoison/model.hpp"

namespace fairpoison {

/// Per-feature affine transform fit on one dataset and reusable on others.
/// Columns with (population) stddev below `kConstantTol` map to all zeros.
struct Scaler {
  Vector mean;
  Vector inv_scale;  // 1/stddev, or 0 for constant columns

  static constexpr double kConstantTol = 1e-12;

  Dataset apply(const Dataset& data) const;
};

/// Fits a scaler on `data` and returns the standardized dataset with it.
/// Each non-constant column ends with empirical mean 0 and stddev 1.
std::pair<Dataset, Scaler> standardize(const Dataset& data);

/// Model and loss used to score points for hard-example filtering.
/// The default is a regularized linear hinge model; scoring drops the
/// regularization term so the ranking reflects per-point fit only.
struct FilterSpec {
  LossSpec loss{LossKind::Hinge, 1e-4};
  TrainHyper hyper{0.5, 400, 0, false};
};

struct FilterResult {
  Dataset easy;
  Dataset hard;
  std::vector<Index> easy_indices;  // rows of the source, ascending
  std::vector<Index> hard_indices;
  Vector losses;  // per-source-row filter loss
  LinearModel filter_model;
};

/// Trains the filter model on the whole dataset, scores every point by its
/// loss, and keeps the floor(keep_fraction * n) smallest-loss points as easy.
/// Ties are broken toward the lower original index.
FilterResult filter_hard_examples(const Dataset& data, double keep_fraction,
                                  const FilterSpec& spec = {});

}  // namespace fairpoison
