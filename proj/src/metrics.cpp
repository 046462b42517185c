#include "fairpoison/metrics.hpp"

#include <atomic>
#include <cmath>
#include <iostream>

namespace fairpoison {

namespace {

std::atomic<std::uint64_t> g_degenerate_cells{0};

void note_degenerate_cells(const SubgroupStats& stats) {
  if (!stats.has_empty_cell()) return;
  if (g_degenerate_cells.fetch_add(1) == 0)
    std::cerr << "fairpoison: warning: empty (label, group) cell; its error "
                 "rate is taken as 0 (further occurrences counted silently)\n";
}

}  // namespace

std::uint64_t degenerate_cell_count() { return g_degenerate_cells.load(); }

double expected_accuracy(const FairClassifier& classifier,
                         const Dataset& data) {
  if (data.empty()) throw DataError("expected_accuracy: empty dataset");
  const Vector p =
      classifier.expected_predictions(data.features(), data.groups());
  double err = 0.0;
  for (Index i = 0; i < data.size(); ++i)
    err += std::abs(p[i] - static_cast<double>(data.label(i)));
  return 1.0 - err / static_cast<double>(data.size());
}

double expected_accuracy(const LinearModel& model, const Dataset& data) {
  return expected_accuracy(FairClassifier::deterministic(model), data);
}

double expected_accuracy_group(const FairClassifier& classifier,
                               const Dataset& data, int group) {
  if (data.empty()) throw DataError("expected_accuracy_group: empty dataset");
  const Vector p =
      classifier.expected_predictions(data.features(), data.groups());
  double err = 0.0;
  Index n = 0;
  for (Index i = 0; i < data.size(); ++i) {
    if (data.group(i) != group) continue;
    err += std::abs(p[i] - static_cast<double>(data.label(i)));
    ++n;
  }
  if (n == 0)
    throw DataError("expected_accuracy_group: no examples in group " +
                    std::to_string(group));
  return 1.0 - err / static_cast<double>(n);
}

double equalized_odds_gap(const SubgroupStats& stats) {
  note_degenerate_cells(stats);
  const double gap_pos = std::abs(stats.rate(1, 0) - stats.rate(1, 1));
  const double gap_neg = std::abs(stats.rate(0, 0) - stats.rate(0, 1));
  return std::max(gap_pos, gap_neg);
}

double linear_relaxation_gap(const SubgroupStats& stats) {
  note_degenerate_cells(stats);
  return (std::abs(stats.rate(1, 0) - stats.rate(1, 1)) +
          std::abs(stats.rate(0, 0) - stats.rate(0, 1))) /
         2.0;
}

SubgroupStats misprediction_stats(const FairClassifier& classifier,
                                  const Dataset& data) {
  if (data.empty()) throw DataError("misprediction_stats: empty dataset");
  const Vector p =
      classifier.expected_predictions(data.features(), data.groups());
  SubgroupStats stats;
  for (Index i = 0; i < data.size(); ++i) {
    const int y = data.label(i);
    const int s = data.group(i);
    ++stats.count[y][s];
    stats.error_mass[y][s] += std::abs(p[i] - static_cast<double>(y));
  }
  return stats;
}

SubgroupStats misprediction_stats(const LinearModel& model,
                                  const Dataset& data) {
  return misprediction_stats(FairClassifier::deterministic(model), data);
}

SubgroupStats linear_loss_stats(const LinearModel& model, const Dataset& data) {
  if (data.empty()) throw DataError("linear_loss_stats: empty dataset");
  const Vector v = decision_values(model, data.features());
  SubgroupStats stats;
  for (Index i = 0; i < data.size(); ++i) {
    const int y = data.label(i);
    const int s = data.group(i);
    ++stats.count[y][s];
    stats.error_mass[y][s] += linear_loss_from_value(v[i], y);
  }
  return stats;
}

double fairness_gap(const FairClassifier& classifier, const Dataset& data) {
  return equalized_odds_gap(misprediction_stats(classifier, data));
}

double fairness_gap(const LinearModel& model, const Dataset& data) {
  return equalized_odds_gap(misprediction_stats(model, data));
}

double relaxed_gap(const LinearModel& model, const Dataset& data) {
  return linear_relaxation_gap(linear_loss_stats(model, data));
}

}  // namespace fairpoison
