#include "fairpoison/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fairpoison {

Dataset Scaler::apply(const Dataset& data) const {
  if (data.dim() != mean.size())
    throw DataError("scaler: dimension mismatch");
  Matrix features = data.features();
  features.rowwise() -= mean.transpose();
  features *= inv_scale.asDiagonal();
  Dataset out(std::move(features), data.labels(), data.groups(), data.name());
  out.set_feature_names(data.feature_names());
  return out;
}

std::pair<Dataset, Scaler> standardize(const Dataset& data) {
  if (data.empty()) throw DataError("standardize: empty dataset");
  const double n = static_cast<double>(data.size());

  Scaler scaler;
  scaler.mean = data.features().colwise().mean();
  Matrix centered = data.features().rowwise() - scaler.mean.transpose();
  const Vector stddev =
      (centered.array().square().colwise().sum() / n).sqrt();

  scaler.inv_scale = Vector::Zero(data.dim());
  for (Index j = 0; j < data.dim(); ++j)
    if (stddev[j] > Scaler::kConstantTol) scaler.inv_scale[j] = 1.0 / stddev[j];

  return {scaler.apply(data), scaler};
}

FilterResult filter_hard_examples(const Dataset& data, double keep_fraction,
                                  const FilterSpec& spec) {
  if (data.empty()) throw DataError("filter_hard_examples: empty dataset");
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
    throw ConfigError("filter_hard_examples: keep_fraction must be in (0, 1]");

  FilterResult result;
  result.filter_model = train_unconstrained(data, spec.loss, spec.hyper);

  // Rank by pointwise loss only; the L2 term is identical for every point.
  const LossSpec score_loss{spec.loss.kind, 0.0};
  const Vector values = decision_values(result.filter_model, data.features());
  result.losses.resize(data.size());
  for (Index i = 0; i < data.size(); ++i)
    result.losses[i] =
        point_loss_from_value(score_loss.kind, values[i], data.label(i));

  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (result.losses[a] != result.losses[b])
      return result.losses[a] < result.losses[b];
    return a < b;
  });

  const Index keep = static_cast<Index>(
      std::floor(keep_fraction * static_cast<double>(data.size())));
  result.easy_indices.assign(order.begin(), order.begin() + keep);
  result.hard_indices.assign(order.begin() + keep, order.end());
  // Ascending source order keeps downstream splits independent of the loss
  // ranking internals.
  std::sort(result.easy_indices.begin(), result.easy_indices.end());
  std::sort(result.hard_indices.begin(), result.hard_indices.end());

  result.easy = data.select(result.easy_indices, data.name() + "/easy");
  result.hard = data.select(result.hard_indices, data.name() + "/hard");
  return result;
}

}  // namespace fairpoison
