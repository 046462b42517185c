#include <doctest.h>

#include <cmath>
#include <random>

#include "fairpoison/model.hpp"
#include "testutil.hpp"

using namespace fairpoison;
namespace tu = fairpoison::testutil;

TEST_SUITE("model") {

TEST_CASE("decision_value basics") {
  LinearModel zero = LinearModel::zeros(3);
  Vector x(3);
  x << 4.0, -2.0, 7.5;
  CHECK(decision_value(zero, x) == 0.0);

  LinearModel m{Vector(3)};
  m.weights << 1.0, 0.0, 1.0;  // w = (1, 0), b = 1
  Vector x2(2);
  x2 << 2.0, 5.0;
  CHECK(decision_value(m, x2) == doctest::Approx(3.0));

  Vector wrong(4);
  wrong.setZero();
  CHECK_THROWS_AS(decision_value(m, wrong), DataError);
}

TEST_CASE("decision_value matches an elementwise-sum oracle") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Index dim = 1 + static_cast<Index>(rng() % 12);
    const LinearModel m = tu::random_model(rng, dim);
    std::normal_distribution<double> gauss(0.0, 2.0);
    Vector x(dim);
    for (Index j = 0; j < dim; ++j) x[j] = gauss(rng);

    double expected = m.weights[dim];
    for (Index j = 0; j < dim; ++j) expected += m.weights[j] * x[j];
    CHECK(std::abs(decision_value(m, x) - expected) <= 1e-12);
  }
}

TEST_CASE("loss values at reference points") {
  LinearModel zero = LinearModel::zeros(2);
  Vector x(2);
  x << 1.0, -1.0;

  // v = 0: hinge 1 for either label, logistic ln 2.
  CHECK(point_loss({LossKind::Hinge, 0.0}, zero, x, 0) == doctest::Approx(1.0));
  CHECK(point_loss({LossKind::Hinge, 0.0}, zero, x, 1) == doctest::Approx(1.0));
  CHECK(point_loss({LossKind::Logistic, 0.0}, zero, x, 1) ==
        doctest::Approx(std::log(2.0)));

  // linear loss with label +1 and v = 3: (1 - 3)/2 = -1.
  LinearModel m{Vector(3)};
  m.weights << 3.0, 0.0, 0.0;
  Vector e1(2);
  e1 << 1.0, 0.0;
  CHECK(point_loss({LossKind::Linear, 0.0}, m, e1, 1) == doctest::Approx(-1.0));
}

TEST_CASE("linear loss gradient is -y(x,1)/2, independent of theta") {
  std::mt19937_64 rng(22);
  const LossSpec spec{LossKind::Linear, 0.0};
  for (int trial = 0; trial < 10; ++trial) {
    const LinearModel m = tu::random_model(rng, 3);
    Vector x(3);
    x << 0.5, -1.5, 2.0;
    for (int label : {0, 1}) {
      const double y = label == 1 ? 1.0 : -1.0;
      const Vector grad = point_loss_gradient(spec, m, x, label);
      for (Index j = 0; j < 3; ++j)
        CHECK(grad[j] == doctest::Approx(-y * x[j] / 2.0));
      CHECK(grad[3] == doctest::Approx(-y / 2.0));
    }
  }
}

TEST_CASE("hinge subgradient at the kink is zero") {
  LinearModel m{Vector(2)};
  m.weights << 1.0, 0.0;  // v = x, margin = y*x
  Vector x(1);
  x << 1.0;  // label 1: m = 1 exactly
  const Vector grad = point_loss_gradient({LossKind::Hinge, 0.0}, m, x, 1);
  CHECK(grad.norm() == 0.0);

  x << 0.5;  // inside the margin
  const Vector inside = point_loss_gradient({LossKind::Hinge, 0.0}, m, x, 1);
  CHECK(inside[0] == doctest::Approx(-0.5));
}

TEST_CASE("zero-one loss has no gradient") {
  LinearModel m = LinearModel::zeros(1);
  Vector x(1);
  x << 1.0;
  CHECK_THROWS_AS(point_loss_gradient({LossKind::ZeroOne, 0.0}, m, x, 1),
                  ConfigError);
}

TEST_CASE("logistic and linear gradients match central finite differences") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double h = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const Index dim = 1 + static_cast<Index>(rng() % 6);
    const LossSpec spec{trial % 2 == 0 ? LossKind::Logistic : LossKind::Linear,
                        trial % 3 == 0 ? 1e-3 : 0.0};
    LinearModel m = tu::random_model(rng, dim);
    Vector x(dim);
    for (Index j = 0; j < dim; ++j) x[j] = gauss(rng);
    const int label = rng() % 2;

    const Vector grad = point_loss_gradient(spec, m, x, label);
    for (Index j = 0; j < m.weights.size(); ++j) {
      LinearModel plus = m;
      LinearModel minus = m;
      plus.weights[j] += h;
      minus.weights[j] -= h;
      const double fd = (point_loss(spec, plus, x, label) -
                         point_loss(spec, minus, x, label)) /
                        (2.0 * h);
      const double scale = std::max(1.0, std::abs(grad[j]));
      CHECK(std::abs(grad[j] - fd) <= 1e-5 * scale);
    }
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("train_unconstrained with zero iterations returns initialization") {
  std::mt19937_64 rng(24);
  const Dataset data = tu::random_dataset(rng, 20, 3);
  const LinearModel m =
      train_unconstrained(data, {LossKind::Logistic, 0.0}, {0.5, 0, 0, false});
  CHECK(m.weights.norm() == 0.0);

  const LinearModel g =
      train_unconstrained(data, {LossKind::Logistic, 0.0}, {0.5, 0, 7, true});
  CHECK(g.weights.norm() > 0.0);
  const LinearModel g2 =
      train_unconstrained(data, {LossKind::Logistic, 0.0}, {0.5, 0, 7, true});
  CHECK(g.weights == g2.weights);
}

TEST_CASE("train_unconstrained separates a margin-1 toy set") {
  // 20 points in 2-D at distance >= 1 from the separator x0 = 0.
  std::vector<Example> examples;
  for (int i = 0; i < 10; ++i) {
    examples.push_back(
        tu::make_example({1.0 + 0.2 * i, i * 0.1 - 0.5}, 1, i % 2));
    examples.push_back(
        tu::make_example({-1.0 - 0.2 * i, 0.4 - i * 0.1}, 0, (i + 1) % 2));
  }
  const Dataset data = Dataset::from_examples(examples, 2);
  const LinearModel m =
      train_unconstrained(data, {LossKind::Logistic, 1e-4}, {0.5, 500, 0, false});

  int errors = 0;
  for (Index i = 0; i < data.size(); ++i)
    errors += predict(m, data.example(i).features) != data.label(i);
  CHECK(errors == 0);
}

}  // TEST_SUITE
