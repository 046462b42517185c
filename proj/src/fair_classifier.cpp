#include "fairpoison/fair_classifier.hpp"

#include <cmath>

namespace fairpoison {

FairClassifier FairClassifier::deterministic(LinearModel model) {
  FairClassifier fc;
  fc.kind_ = Kind::Deterministic;
  fc.base_ = std::move(model);
  return fc;
}

FairClassifier FairClassifier::mixture(
    std::vector<MixtureComponent> components) {
  if (components.empty())
    throw ConfigError("fair classifier: mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : components) {
    if (c.weight < 0)
      throw ConfigError("fair classifier: negative mixture weight");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("fair classifier: mixture weights must sum to 1");
  for (auto& c : components) c.weight /= total;

  FairClassifier fc;
  fc.kind_ = Kind::Mixture;
  fc.components_ = std::move(components);
  return fc;
}

FairClassifier FairClassifier::postprocessed(LinearModel base,
                                             FlipTable flips) {
  for (int s = 0; s < 2; ++s)
    for (int p = 0; p < 2; ++p)
      if (flips[s][p] < 0.0 || flips[s][p] > 1.0)
        throw ConfigError("fair classifier: flip probability outside [0,1]");
  FairClassifier fc;
  fc.kind_ = Kind::Postprocessed;
  fc.base_ = std::move(base);
  fc.flips_ = flips;
  return fc;
}

double FairClassifier::expected_prediction(const Vector& x, int group) const {
  switch (kind_) {
    case Kind::Deterministic:
      return static_cast<double>(predict(base_, x));
    case Kind::Mixture: {
      double p = 0.0;
      for (const auto& c : components_)
        p += c.weight * static_cast<double>(predict(c.model, x));
      return p;
    }
    case Kind::Postprocessed:
      return flips_[group][predict(base_, x)];
  }
  return 0.0;
}

Vector FairClassifier::expected_predictions(const Matrix& X,
                                            const IntVector& groups) const {
  Vector out(X.rows());
  switch (kind_) {
    case Kind::Deterministic: {
      const Vector v = decision_values(base_, X);
      for (Index i = 0; i < v.size(); ++i)
        out[i] = static_cast<double>(predict_from_value(v[i]));
      break;
    }
    case Kind::Mixture: {
      out.setZero();
      for (const auto& c : components_) {
        const Vector v = decision_values(c.model, X);
        for (Index i = 0; i < v.size(); ++i)
          out[i] += c.weight * static_cast<double>(predict_from_value(v[i]));
      }
      break;
    }
    case Kind::Postprocessed: {
      const Vector v = decision_values(base_, X);
      for (Index i = 0; i < v.size(); ++i)
        out[i] = flips_[groups[i]][predict_from_value(v[i])];
      break;
    }
  }
  return out;
}

}  // namespace fairpoison
