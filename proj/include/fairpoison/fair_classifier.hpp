#pragma once

#include <array>
#include <vector>

#include "fairpoison/common.hpp"
#include "fairpoison/model.hpp"

namespace fairpoison {

struct MixtureComponent {
  LinearModel model;
  double weight = 0.0;
};

/// P(output positive | group s, base prediction yhat), indexed [s][yhat].
/// Identity is {{0, 1}, {0, 1}}: keep the base prediction.
using FlipTable = std::array<std::array<double, 2>, 2>;

inline FlipTable identity_flips() { return {{{0.0, 1.0}, {0.0, 1.0}}}; }

/// Randomized binary classifier: either a deterministic linear model, a
/// weighted mixture of linear models, or a base model with group- and
/// prediction-conditional flip probabilities. Evaluation is always by exact
/// expectation, never by sampling.
class FairClassifier {
 public:
  enum class Kind { Deterministic, Mixture, Postprocessed };

  static FairClassifier deterministic(LinearModel model);
  /// Weights must be nonnegative and sum to 1 (within 1e-9); normalized on
  /// construction.
  static FairClassifier mixture(std::vector<MixtureComponent> components);
  static FairClassifier postprocessed(LinearModel base, FlipTable flips);

  Kind kind() const { return kind_; }
  const std::vector<MixtureComponent>& components() const {
    return components_;
  }
  const LinearModel& base() const { return base_; }
  const FlipTable& flips() const { return flips_; }

  /// Probability of predicting positive, in [0,1].
  double expected_prediction(const Vector& x, int group) const;
  /// Expected predictions for every row of X.
  Vector expected_predictions(const Matrix& X, const IntVector& groups) const;

 private:
  Kind kind_ = Kind::Deterministic;
  LinearModel base_;  // deterministic / postprocessed base
  std::vector<MixtureComponent> components_;
  FlipTable flips_ = identity_flips();
};

}  // namespace fairpoison
