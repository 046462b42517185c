#pragma once

#include <cstdint>

#include "fairpoison/common.hpp"
#include "fairpoison/dataset.hpp"

namespace fairpoison {

/// Linear classifier parameters: dim feature weights followed by the bias.
/// Prediction is 1 when the decision value is strictly positive.
struct LinearModel {
  Vector weights;  // length dim + 1, last entry is the bias

  Index dim() const { return weights.size() - 1; }
  auto feature_weights() const { return weights.head(weights.size() - 1); }
  double bias() const { return weights[weights.size() - 1]; }

  static LinearModel zeros(Index dim);
};

double decision_value(const LinearModel& model, const Vector& x);

/// Decision values for every row of X in one matrix product.
Vector decision_values(const LinearModel& model, const Matrix& X);

inline int predict_from_value(double v) { return v > 0.0 ? 1 : 0; }
int predict(const LinearModel& model, const Vector& x);
IntVector predictions(const LinearModel& model, const Matrix& X);

enum class LossKind { Logistic, Hinge, Linear, ZeroOne };

/// Loss choice plus an L2 coefficient on the feature weights (bias excluded).
/// The regularizer enters both the loss value (0.5 * reg * |w|^2) and the
/// gradient, so finite-difference checks hold at any regularization level.
struct LossSpec {
  LossKind kind = LossKind::Logistic;
  double regularization = 0.0;
};

/// Pointwise loss at one example, with the label remapped to {-1,+1}:
///   logistic  log(1 + exp(-m))
///   hinge     max(0, 1 - m)
///   linear    (1 - m) / 2          (unbounded below)
///   zero-one  prediction != label
/// where m = remapped_label * decision_value.
double point_loss(const LossSpec& spec, const LinearModel& model,
                  const Vector& x, int label);

/// Analytic (sub)gradient in weight space, bias included. Hinge at the kink
/// (m == 1) takes subgradient 0. ZeroOne is rejected.
Vector point_loss_gradient(const LossSpec& spec, const LinearModel& model,
                           const Vector& x, int label);

/// Pointwise loss evaluated from a precomputed decision value (no reg term).
double point_loss_from_value(LossKind kind, double value, int label);

/// Linear loss (1 - remapped_label * value) / 2.
double linear_loss_from_value(double value, int label);

double average_loss(const LossSpec& spec, const LinearModel& model,
                    const Dataset& data);
Vector average_loss_gradient(const LossSpec& spec, const LinearModel& model,
                             const Dataset& data);

struct TrainHyper {
  double step_size = 0.5;
  int iterations = 400;
  std::uint64_t seed = 0;
  /// Zero initialization by default; seed-driven Gaussian (sigma 0.01)
  /// when set.
  bool gaussian_init = false;
};

/// Full-batch gradient descent on the average loss. Deterministic given the
/// hyperparameters (the seed only drives Gaussian initialization). Returns the
/// final iterate; throws NumericalError on divergence.
LinearModel train_unconstrained(const Dataset& data, const LossSpec& spec,
                                const TrainHyper& hyper);

}  // namespace fairpoison
