#pragma once

#include <cstdint>

#include "fairpoison/common.hpp"
#include "fairpoison/dataset.hpp"
#include "fairpoison/fair_classifier.hpp"
#include "fairpoison/model.hpp"

namespace fairpoison {

/// Expected accuracy 1 - mean |f(x) - y|, where f(x) is the expected positive
/// prediction. Deterministic models yield the plain accuracy.
double expected_accuracy(const FairClassifier& classifier, const Dataset& data);
double expected_accuracy(const LinearModel& model, const Dataset& data);

/// Expected accuracy restricted to examples with the given group value.
/// Throws DataError when the group slice is empty.
double expected_accuracy_group(const FairClassifier& classifier,
                               const Dataset& data, int group);

/// Equalized-odds gap from per-cell stats whose error mass counts
/// mispredictions: max over y of |rate(y,0) - rate(y,1)|. Empty cells
/// contribute rate 0 and are reported through the degeneracy counter.
double equalized_odds_gap(const SubgroupStats& stats);

/// Convex relaxation from per-cell stats whose error mass sums linear losses:
/// (|rate(1,0) - rate(1,1)| + |rate(0,0) - rate(0,1)|) / 2.
double linear_relaxation_gap(const SubgroupStats& stats);

/// Per-cell counts plus expected misprediction mass of a classifier.
SubgroupStats misprediction_stats(const FairClassifier& classifier,
                                  const Dataset& data);
SubgroupStats misprediction_stats(const LinearModel& model,
                                  const Dataset& data);

/// Per-cell counts plus summed linear losses of a linear model.
SubgroupStats linear_loss_stats(const LinearModel& model, const Dataset& data);

/// Fairness gap of equalized odds, in [0,1].
double fairness_gap(const FairClassifier& classifier, const Dataset& data);
double fairness_gap(const LinearModel& model, const Dataset& data);

/// Convex relaxation of the fairness gap built from average linear losses.
double relaxed_gap(const LinearModel& model, const Dataset& data);

/// Number of empty-(y,s)-cell evaluations seen so far. The first occurrence
/// is logged to stderr; the counter lets harness runs surface degeneracies in
/// metadata without aborting a grid.
std::uint64_t degenerate_cell_count();

}  // namespace fairpoison
