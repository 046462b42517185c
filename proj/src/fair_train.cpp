#include "fairpoison/fair_train.hpp"

#include <array>
#include <cmath>
#include <iostream>
#include <vector>

#include "fairpoison/lp.hpp"
#include "fairpoison/metrics.hpp"

namespace fairpoison {

namespace {

// Base-prediction counts per (y, s, yhat) bucket.
struct PredictionCells {
  // m[y][s][yhat]
  std::array<std::array<std::array<double, 2>, 2>, 2> m{};
  std::array<std::array<double, 2>, 2> cell_total{};  // [y][s]
};

PredictionCells count_prediction_cells(const LinearModel& base,
                                       const Dataset& data) {
  PredictionCells cells;
  const IntVector preds = predictions(base, data.features());
  for (Index i = 0; i < data.size(); ++i) {
    const int y = data.label(i);
    const int s = data.group(i);
    cells.m[y][s][preds[i]] += 1.0;
    cells.cell_total[y][s] += 1.0;
  }
  return cells;
}

}  // namespace

FairClassifier postprocess_equalized_odds(const LinearModel& base,
                                          const Dataset& data) {
  if (data.empty()) throw DataError("postprocess: empty dataset");
  const PredictionCells cells = count_prediction_cells(base, data);
  for (int y = 0; y < 2; ++y)
    for (int s = 0; s < 2; ++s)
      if (cells.cell_total[y][s] == 0.0)
        throw DataError("postprocess: empty (y=" + std::to_string(y) +
                        ", s=" + std::to_string(s) + ") cell");

  // Variables p[s][yhat] flattened as [p00, p01, p10, p11] where
  // p[s][yhat] = P(output positive | group s, base prediction yhat).
  const auto var = [](int s, int yhat) { return 2 * s + yhat; };

  LPProblem lp = LPProblem::with_variables(4);
  lp.lower = Vector::Zero(4);
  lp.upper = Vector::Ones(4);

  // Expected errors: positives contribute (1 - p), negatives contribute p.
  const double n = static_cast<double>(data.size());
  for (int s = 0; s < 2; ++s)
    for (int yhat = 0; yhat < 2; ++yhat)
      lp.objective[var(s, yhat)] =
          (cells.m[0][s][yhat] - cells.m[1][s][yhat]) / n;

  // Expected positive rate in cell (y, s) is linear in p:
  //   rate(y, s) = sum_yhat m[y][s][yhat] / cell_total[y][s] * p[s][yhat].
  // Equalize TPR (y = 1) and FPR (y = 0) across groups.
  lp.eq_coeffs = Matrix::Zero(2, 4);
  lp.eq_rhs = Vector::Zero(2);
  for (int y = 0; y < 2; ++y)
    for (int yhat = 0; yhat < 2; ++yhat) {
      lp.eq_coeffs(y, var(0, yhat)) += cells.m[y][0][yhat] / cells.cell_total[y][0];
      lp.eq_coeffs(y, var(1, yhat)) -= cells.m[y][1][yhat] / cells.cell_total[y][1];
    }

  const LPResult result = solve_small_lp(lp);
  if (result.status != LPStatus::Optimal) {
    // Cannot happen with the full box (constant classifiers are feasible);
    // keep the base model if it somehow does.
    std::cerr << "fairpoison: warning: post-processing LP not optimal, "
                 "keeping base predictions\n";
    return FairClassifier::postprocessed(base, identity_flips());
  }

  FlipTable flips;
  for (int s = 0; s < 2; ++s)
    for (int yhat = 0; yhat < 2; ++yhat)
      flips[s][yhat] = std::clamp(result.point[var(s, yhat)], 0.0, 1.0);
  return FairClassifier::postprocessed(base, flips);
}

namespace {

// Weighted full-batch gradient descent on the logistic loss; the cost-
// sensitive oracle behind the reductions best response.
LinearModel train_weighted(const Matrix& X, const IntVector& targets,
                           const Vector& weights, const LossSpec& spec,
                           const TrainHyper& hyper, const LinearModel* warm) {
  const Index n = X.rows();
  const Index dim = X.cols();
  const double total = weights.sum();
  LinearModel model =
      warm != nullptr ? *warm : LinearModel::zeros(dim);

  if (total <= 0.0) return model;  // all costs vanish: nothing to fit

  for (int it = 0; it < hyper.iterations; ++it) {
    const Vector values = decision_values(model, X);
    Vector factors(n);
    for (Index i = 0; i < n; ++i) {
      const double y = targets[i] == 1 ? 1.0 : -1.0;
      factors[i] = weights[i] * (-y / (1.0 + std::exp(y * values[i])));
    }
    Vector grad(dim + 1);
    grad.head(dim) = X.transpose() * factors;
    grad[dim] = factors.sum();
    grad /= total;
    grad.head(dim) += spec.regularization * model.feature_weights();
    model.weights -= hyper.step_size * grad;
    if (!model.weights.allFinite())
      throw NumericalError("reductions: weighted base learner diverged");
  }
  return model;
}

}  // namespace

FairClassifier reductions_equalized_odds(const Dataset& data, double delta,
                                         const ReductionsHyper& hyper) {
  if (!(delta > 0.0))
    throw ConfigError("reductions: delta must be strictly positive");
  if (data.empty()) throw DataError("reductions: empty dataset");
  const SubgroupStats counts = SubgroupStats::counts_of(data);
  if (counts.has_empty_cell())
    throw DataError("reductions: empty (y,s) cell in training data");

  const Index n = data.size();
  const double nn = static_cast<double>(n);

  // Constraint k in {0..3}: sign_k * (rate_{y_k,0} - rate_{y_k,1}) <= delta,
  // where rate_{y,s} is the positive-prediction rate on cell (y, s);
  // y_k = 1 (TPR) for k < 2, y_k = 0 (FPR) otherwise.
  const auto constraint_y = [](int k) { return k < 2 ? 1 : 0; };
  const auto constraint_sign = [](int k) { return k % 2 == 0 ? 1.0 : -1.0; };

  // Per-example coefficient of h(x_i) in (rate_{y,0} - rate_{y,1}).
  Vector tpr_coeff = Vector::Zero(n);
  Vector fpr_coeff = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const int y = data.label(i);
    const int s = data.group(i);
    const double c =
        (s == 0 ? 1.0 : -1.0) / static_cast<double>(counts.count[y][s]);
    (y == 1 ? tpr_coeff : fpr_coeff)[i] = c;
  }

  // Multipliers start at zero and rise only on violated constraints
  // (projected ascent clipped to [0, B]); slack constraints never tax the
  // best response, so the uniform mixture tracks the unconstrained model
  // whenever the data is already fair.
  std::array<double, 4> lambda{};
  std::vector<MixtureComponent> components;
  components.reserve(static_cast<std::size_t>(hyper.iterations));
  LinearModel previous = LinearModel::zeros(data.dim());

  for (int t = 0; t < hyper.iterations; ++t) {
    const double tpr_lambda = lambda[0] - lambda[1];
    const double fpr_lambda = lambda[2] - lambda[3];

    // Per-example cost of predicting positive relative to negative. The best
    // response minimizes sum_i a_i h_i, i.e. weighted classification with
    // target (a_i < 0) and weight |a_i|.
    Vector weights(n);
    IntVector targets(n);
    for (Index i = 0; i < n; ++i) {
      const double err_coeff = (1.0 - 2.0 * data.label(i)) / nn;
      const double a =
          err_coeff + tpr_lambda * tpr_coeff[i] + fpr_lambda * fpr_coeff[i];
      targets[i] = a < 0.0 ? 1 : 0;
      weights[i] = std::abs(a);
    }

    const LinearModel h =
        train_weighted(data.features(), targets, weights, hyper.base_loss,
                       hyper.base_hyper, hyper.warm_start ? &previous : nullptr);
    previous = h;
    components.push_back({h, 1.0});

    // Ascend the multipliers by each constraint's violation.
    const IntVector preds = predictions(h, data.features());
    double tpr_diff = 0.0;
    double fpr_diff = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (preds[i] != 1) continue;
      tpr_diff += tpr_coeff[i];
      fpr_diff += fpr_coeff[i];
    }
    const double step =
        hyper.multiplier_step / std::sqrt(static_cast<double>(t + 1));
    for (int k = 0; k < 4; ++k) {
      const double g =
          constraint_sign(k) * (constraint_y(k) == 1 ? tpr_diff : fpr_diff);
      lambda[k] =
          std::clamp(lambda[k] + step * (g - delta), 0.0, hyper.multiplier_bound);
    }
  }

  const double w = 1.0 / static_cast<double>(components.size());
  for (auto& c : components) c.weight = w;
  return FairClassifier::mixture(std::move(components));
}

}  // namespace fairpoison
