#include "fairpoison/model.hpp"

#include <cmath>
#include <random>

namespace fairpoison {

namespace {

inline double remap_label(int label) { return label == 1 ? 1.0 : -1.0; }

inline void check_dims(const LinearModel& model, Index feature_dim,
                       const char* where) {
  if (model.weights.size() != feature_dim + 1)
    throw DataError(std::string(where) + ": dimension mismatch (weights " +
                    std::to_string(model.weights.size()) + ", features " +
                    std::to_string(feature_dim) + ")");
}

}  // namespace

LinearModel LinearModel::zeros(Index dim) {
  return LinearModel{Vector::Zero(dim + 1)};
}

double decision_value(const LinearModel& model, const Vector& x) {
  check_dims(model, x.size(), "decision_value");
  return model.feature_weights().dot(x) + model.bias();
}

Vector decision_values(const LinearModel& model, const Matrix& X) {
  check_dims(model, X.cols(), "decision_values");
  return (X * model.feature_weights()).array() + model.bias();
}

int predict(const LinearModel& model, const Vector& x) {
  return predict_from_value(decision_value(model, x));
}

IntVector predictions(const LinearModel& model, const Matrix& X) {
  const Vector v = decision_values(model, X);
  IntVector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out[i] = predict_from_value(v[i]);
  return out;
}

double point_loss_from_value(LossKind kind, double value, int label) {
  const double m = remap_label(label) * value;
  switch (kind) {
    case LossKind::Logistic:
      // log(1 + exp(-m)) computed from the stable branch.
      return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    case LossKind::Hinge:
      return std::max(0.0, 1.0 - m);
    case LossKind::Linear:
      return (1.0 - m) / 2.0;
    case LossKind::ZeroOne:
      return predict_from_value(value) == label ? 0.0 : 1.0;
  }
  throw ConfigError("point_loss: unknown loss kind");
}

double linear_loss_from_value(double value, int label) {
  return (1.0 - remap_label(label) * value) / 2.0;
}

double point_loss(const LossSpec& spec, const LinearModel& model,
                  const Vector& x, int label) {
  const double v = decision_value(model, x);
  double loss = point_loss_from_value(spec.kind, v, label);
  if (spec.regularization > 0)
    loss += 0.5 * spec.regularization * model.feature_weights().squaredNorm();
  return loss;
}

Vector point_loss_gradient(const LossSpec& spec, const LinearModel& model,
                           const Vector& x, int label) {
  check_dims(model, x.size(), "point_loss_gradient");
  if (spec.kind == LossKind::ZeroOne)
    throw ConfigError("point_loss_gradient: zero-one loss has no gradient");

  const double y = remap_label(label);
  const double m = y * decision_value(model, x);

  // d loss / d value, applied to (x, 1).
  double factor = 0.0;
  switch (spec.kind) {
    case LossKind::Logistic:
      factor = -y / (1.0 + std::exp(m));
      break;
    case LossKind::Hinge:
      factor = m < 1.0 ? -y : 0.0;  // subgradient 0 at the kink
      break;
    case LossKind::Linear:
      factor = -y / 2.0;
      break;
    case LossKind::ZeroOne:
      break;
  }

  Vector grad(model.weights.size());
  grad.head(x.size()) = factor * x;
  grad[x.size()] = factor;
  if (spec.regularization > 0)
    grad.head(x.size()) += spec.regularization * model.feature_weights();
  return grad;
}

double average_loss(const LossSpec& spec, const LinearModel& model,
                    const Dataset& data) {
  if (data.empty()) throw DataError("average_loss: empty dataset");
  check_dims(model, data.dim(), "average_loss");
  const Vector values = decision_values(model, data.features());
  double sum = 0.0;
  for (Index i = 0; i < data.size(); ++i)
    sum += point_loss_from_value(spec.kind, values[i], data.label(i));
  double loss = sum / static_cast<double>(data.size());
  if (spec.regularization > 0)
    loss += 0.5 * spec.regularization * model.feature_weights().squaredNorm();
  return loss;
}

Vector average_loss_gradient(const LossSpec& spec, const LinearModel& model,
                             const Dataset& data) {
  if (data.empty()) throw DataError("average_loss_gradient: empty dataset");
  check_dims(model, data.dim(), "average_loss_gradient");
  if (spec.kind == LossKind::ZeroOne)
    throw ConfigError("average_loss_gradient: zero-one loss has no gradient");

  const Vector values = decision_values(model, data.features());
  Vector factors(data.size());
  for (Index i = 0; i < data.size(); ++i) {
    const double y = remap_label(data.label(i));
    const double m = y * values[i];
    switch (spec.kind) {
      case LossKind::Logistic:
        factors[i] = -y / (1.0 + std::exp(m));
        break;
      case LossKind::Hinge:
        factors[i] = m < 1.0 ? -y : 0.0;
        break;
      case LossKind::Linear:
        factors[i] = -y / 2.0;
        break;
      case LossKind::ZeroOne:
        break;
    }
  }

  Vector grad(model.weights.size());
  grad.head(data.dim()) = data.features().transpose() * factors;
  grad[data.dim()] = factors.sum();
  grad /= static_cast<double>(data.size());
  if (spec.regularization > 0)
    grad.head(data.dim()) += spec.regularization * model.feature_weights();
  return grad;
}

LinearModel train_unconstrained(const Dataset& data, const LossSpec& spec,
                                const TrainHyper& hyper) {
  if (data.empty()) throw DataError("train_unconstrained: empty dataset");

  LinearModel model = LinearModel::zeros(data.dim());
  if (hyper.gaussian_init) {
    std::mt19937_64 rng(hyper.seed);
    std::normal_distribution<double> gauss(0.0, 0.01);
    for (Index j = 0; j < model.weights.size(); ++j)
      model.weights[j] = gauss(rng);
  }

  for (int it = 0; it < hyper.iterations; ++it) {
    const Vector grad = average_loss_gradient(spec, model, data);
    model.weights -= hyper.step_size * grad;
    if (!model.weights.allFinite())
      throw NumericalError("train_unconstrained: diverged at iteration " +
                           std::to_string(it));
  }
  if (!std::isfinite(average_loss(spec, model, data)))
    throw NumericalError("train_unconstrained: non-finite final loss");
  return model;
}

}  // namespace fairpoison
