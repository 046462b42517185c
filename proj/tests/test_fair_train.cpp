#include <doctest.h>

#include <cmath>
#include <random>

#include "fairpoison/fair_train.hpp"
#include "fairpoison/metrics.hpp"
#include "fairpoison/synthetic.hpp"
#include "testutil.hpp"

using namespace fairpoison;
namespace tu = fairpoison::testutil;

namespace {

// Group-conditional expected positive rates on label-y examples.
std::array<double, 2> expected_rate(const FairClassifier& fc,
                                    const Dataset& data, int y) {
  double sum[2] = {0.0, 0.0};
  double n[2] = {0.0, 0.0};
  const Vector p = fc.expected_predictions(data.features(), data.groups());
  for (Index i = 0; i < data.size(); ++i) {
    if (data.label(i) != y) continue;
    sum[data.group(i)] += p[i];
    n[data.group(i)] += 1.0;
  }
  return {sum[0] / n[0], sum[1] / n[1]};
}

// Dataset where the base model's TPR/FPR differ across groups: see the cell
// layout in the comments. Base model predicts x0 > 0.
Dataset unequal_rates_dataset() {
  std::vector<Example> examples = {
      tu::make_example({1.0}, 1, 0),  tu::make_example({2.0}, 1, 0),
      tu::make_example({-1.0}, 0, 0), tu::make_example({1.0}, 0, 0),
      tu::make_example({1.0}, 1, 1),  tu::make_example({-1.0}, 1, 1),
      tu::make_example({-1.0}, 0, 1), tu::make_example({-2.0}, 0, 1)};
  return Dataset::from_examples(examples, 1);
}

LinearModel identity_model() {
  LinearModel m{Vector(2)};
  m.weights << 1.0, 0.0;
  return m;
}

SyntheticSpec biased_spec(Index n) {
  // The minority-positive cell sits much closer to the boundary than the
  // rest, so the unconstrained model carries a ~0.3 equalized-odds gap.
  SyntheticSpec spec;
  spec.n = n;
  spec.dim = 2;
  spec.group_fraction = {0.7, 0.3};
  spec.positive_rate = {0.5, 0.35};
  spec.group_in_features = true;
  const auto mean = [](double a, double b) {
    Vector m(2);
    m << a, b;
    return m;
  };
  spec.cell[0][0] = CellGaussian::isotropic(mean(-1.0, 0.0), 1.0);
  spec.cell[1][0] = CellGaussian::isotropic(mean(1.0, 0.2), 1.0);
  spec.cell[0][1] = CellGaussian::isotropic(mean(-1.0, -0.2), 1.0);
  spec.cell[1][1] = CellGaussian::isotropic(mean(0.4, 0.1), 1.0);
  return spec;
}

}  // namespace

TEST_SUITE("fair_train") {

TEST_CASE("postprocess equalizes rates to 1e-6 and keeps optimal accuracy") {
  const Dataset data = unequal_rates_dataset();
  const LinearModel base = identity_model();
  const FairClassifier fc = postprocess_equalized_odds(base, data);

  const auto tpr = expected_rate(fc, data, 1);
  const auto fpr = expected_rate(fc, data, 0);
  CHECK(std::abs(tpr[0] - tpr[1]) <= 1e-6);
  CHECK(std::abs(fpr[0] - fpr[1]) <= 1e-6);
  CHECK(fairness_gap(fc, data) <= 1e-6);

  // Base cell rates: q(1,0)=1, q(0,0)=.5, q(1,1)=.5, q(0,1)=0. Solving the
  // LP by hand gives expected accuracy 2/3 (flips 1, 2/3, 1/3, 0).
  CHECK(expected_accuracy(fc, data) == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("postprocess on an already-fair base keeps its accuracy") {
  // Symmetric across groups: base is exact-fair, so no accuracy is spent.
  std::vector<Example> examples = {
      tu::make_example({1.0}, 1, 0), tu::make_example({-1.0}, 0, 0),
      tu::make_example({1.0}, 1, 1), tu::make_example({-1.0}, 0, 1)};
  const Dataset data = Dataset::from_examples(examples, 1);
  const LinearModel base = identity_model();
  REQUIRE(fairness_gap(base, data) == doctest::Approx(0.0));

  const FairClassifier fc = postprocess_equalized_odds(base, data);
  CHECK(expected_accuracy(fc, data) ==
        doctest::Approx(expected_accuracy(base, data)).epsilon(1e-9));
  CHECK(fairness_gap(fc, data) <= 1e-6);
}

TEST_CASE("postprocess of a constant-positive base changes nothing") {
  // Majority-positive data: always-predict-1 is already the loss-minimizing
  // fair classifier, so the LP keeps it.
  std::vector<Example> examples;
  for (int i = 0; i < 12; ++i)
    examples.push_back(tu::make_example({i * 0.1}, 1, i % 2));
  for (int i = 0; i < 8; ++i)
    examples.push_back(tu::make_example({-i * 0.1}, 0, i % 2));
  const Dataset data = Dataset::from_examples(examples, 1);

  LinearModel constant = LinearModel::zeros(1);
  constant.weights[1] = 3.0;
  REQUIRE(fairness_gap(constant, data) == doctest::Approx(0.0));
  const FairClassifier fc = postprocess_equalized_odds(constant, data);
  CHECK(fairness_gap(fc, data) <= 1e-6);
  CHECK(expected_accuracy(fc, data) ==
        doctest::Approx(expected_accuracy(constant, data)).epsilon(1e-9));
}

TEST_CASE("postprocess matches a grid-search oracle on the 8-point set") {
  const Dataset data = unequal_rates_dataset();
  const LinearModel base = identity_model();
  const FairClassifier fc = postprocess_equalized_odds(base, data);
  const double lp_error = 1.0 - expected_accuracy(fc, data);

  // Cell rates under the base: TPR0 = p01, TPR1 = (p11 + p10)/2,
  // FPR0 = (p01 + p00)/2, FPR1 = p10. Enumerate the exactly-fair family on a
  // 0.01 grid of the two free parameters.
  double family_best = 1e300;
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) {
      const double p11 = i / 100.0;
      const double p10 = j / 100.0;
      const double p01 = 0.5 * (p11 + p10);
      const double p00 = 2.0 * p10 - p01;
      if (p00 < 0.0 || p00 > 1.0) continue;
      // errors/8: 2(1-p01) + (p01 + p00) + (2 - p11 - p10) + 2 p10
      const double err =
          (2.0 * (1.0 - p01) + p01 + p00 + 2.0 - p11 - p10 + 2.0 * p10) / 8.0;
      family_best = std::min(family_best, err);
    }
  }
  CHECK(lp_error <= family_best + 1e-9);
  CHECK(std::abs(lp_error - family_best) <= 0.01);

  // Literal 0.05-step grid over p^4, restricted to exactly fair points: the
  // LP solution is never worse than the best feasible grid point.
  double grid_best = 1e300;
  for (int a = 0; a <= 20; ++a)
    for (int b = 0; b <= 20; ++b)
      for (int c = 0; c <= 20; ++c)
        for (int d = 0; d <= 20; ++d) {
          const double p00 = a / 20.0, p01 = b / 20.0;
          const double p10 = c / 20.0, p11 = d / 20.0;
          if (std::abs(p01 - 0.5 * (p11 + p10)) > 1e-9) continue;
          if (std::abs(0.5 * (p01 + p00) - p10) > 1e-9) continue;
          const double err = (2.0 * (1.0 - p01) + p01 + p00 + 2.0 - p11 - p10 +
                              2.0 * p10) /
                             8.0;
          grid_best = std::min(grid_best, err);
        }
  CHECK(lp_error <= grid_best + 1e-9);
}

TEST_CASE("postprocess rejects degenerate cells") {
  std::vector<Example> examples = {
      tu::make_example({1.0}, 1, 0), tu::make_example({-1.0}, 0, 0),
      tu::make_example({1.0}, 1, 1)};  // no (0,1) cell
  const Dataset data = Dataset::from_examples(examples, 1);
  CHECK_THROWS_AS(postprocess_equalized_odds(identity_model(), data),
                  DataError);
}

TEST_CASE("reductions with a vacuous constraint tracks the unconstrained model") {
  const Dataset data = generate_synthetic(biased_spec(600), 5);
  ReductionsHyper hyper;
  hyper.iterations = 10;
  hyper.base_hyper.iterations = 200;

  const FairClassifier mixture = reductions_equalized_odds(data, 1.0, hyper);
  const LinearModel unconstrained =
      train_unconstrained(data, {LossKind::Logistic, 1e-4}, {0.5, 200, 0, false});
  CHECK(std::abs(expected_accuracy(mixture, data) -
                 expected_accuracy(unconstrained, data)) <= 0.01);

  double weight_sum = 0.0;
  for (const auto& c : mixture.components()) weight_sum += c.weight;
  CHECK(weight_sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("reductions leaves an already-fair problem unchanged") {
  // Groups share one distribution: the unconstrained model is already fair.
  SyntheticSpec spec;
  spec.n = 400;
  spec.dim = 2;
  spec.group_fraction = {0.5, 0.5};
  spec.positive_rate = {0.5, 0.5};
  spec.group_in_features = false;
  const auto mean = [](double a) {
    Vector m(2);
    m << a, 0.0;
    return m;
  };
  for (int s = 0; s < 2; ++s) {
    spec.cell[0][s] = CellGaussian::isotropic(mean(-2.0), 0.5);
    spec.cell[1][s] = CellGaussian::isotropic(mean(2.0), 0.5);
  }
  const Dataset data = generate_synthetic(spec, 9);

  ReductionsHyper hyper;
  hyper.iterations = 10;
  hyper.base_hyper.iterations = 200;
  const FairClassifier mixture = reductions_equalized_odds(data, 0.1, hyper);
  const LinearModel unconstrained =
      train_unconstrained(data, {LossKind::Logistic, 1e-4}, {0.5, 200, 0, false});

  CHECK(std::abs(expected_accuracy(mixture, data) -
                 expected_accuracy(unconstrained, data)) <= 0.01);
  CHECK(fairness_gap(mixture, data) <= 0.1 + 0.05);
}

TEST_CASE("reductions meets the target gap with slack on biased data") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Dataset data = generate_synthetic(biased_spec(800), seed);
    for (double delta : {0.1, 0.01}) {
      const FairClassifier mixture = reductions_equalized_odds(data, delta);
      CHECK(fairness_gap(mixture, data) <= delta + 0.05);
    }
  }
}

TEST_CASE("reductions rejects nonpositive delta and empty cells") {
  const Dataset data = generate_synthetic(biased_spec(200), 3);
  CHECK_THROWS_AS(reductions_equalized_odds(data, 0.0), ConfigError);

  std::vector<Example> examples = {tu::make_example({1.0}, 1, 0),
                                   tu::make_example({-1.0}, 0, 0)};
  const Dataset degenerate = Dataset::from_examples(examples, 1);
  CHECK_THROWS_AS(reductions_equalized_odds(degenerate, 0.1), DataError);
}

}  // TEST_SUITE
