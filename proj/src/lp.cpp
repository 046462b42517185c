#include "fairpoison/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace fairpoison {

namespace {

constexpr double kTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Full-tableau simplex with Bland's rule. Rows 0..m-1 hold B^-1[A | b];
// row m is the priced-out cost row with -objective in the rhs cell.
// Columns listed in `blocked` never enter the basis.
enum class SimplexOutcome { Optimal, Unbounded };

SimplexOutcome run_simplex(Matrix& T, std::vector<Index>& basis,
                           const std::vector<bool>& blocked) {
  const Index m = T.rows() - 1;
  const Index n = T.cols() - 1;
  for (;;) {
    Index entering = -1;
    for (Index j = 0; j < n; ++j) {
      if (blocked[static_cast<std::size_t>(j)]) continue;
      if (T(m, j) < -kTol) {
        entering = j;
        break;  // Bland: lowest eligible index
      }
    }
    if (entering < 0) return SimplexOutcome::Optimal;

    Index pivot_row = -1;
    double best_ratio = kInf;
    for (Index i = 0; i < m; ++i) {
      if (T(i, entering) > kTol) {
        const double ratio = T(i, n) / T(i, entering);
        if (ratio < best_ratio - kTol ||
            (ratio < best_ratio + kTol &&
             (pivot_row < 0 || basis[static_cast<std::size_t>(i)] <
                                   basis[static_cast<std::size_t>(pivot_row)]))) {
          best_ratio = ratio;
          pivot_row = i;
        }
      }
    }
    if (pivot_row < 0) return SimplexOutcome::Unbounded;

    T.row(pivot_row) /= T(pivot_row, entering);
    for (Index i = 0; i <= m; ++i) {
      if (i == pivot_row) continue;
      const double factor = T(i, entering);
      if (factor != 0.0) T.row(i) -= factor * T.row(pivot_row);
    }
    basis[static_cast<std::size_t>(pivot_row)] = entering;
  }
}

void price_out(Matrix& T, const std::vector<Index>& basis, const Vector& cost) {
  const Index m = T.rows() - 1;
  const Index n = T.cols() - 1;
  T.row(m).setZero();
  T.row(m).head(n) = cost.transpose();
  for (Index i = 0; i < m; ++i) {
    const Index b = basis[static_cast<std::size_t>(i)];
    const double c = cost[b];
    if (c != 0.0) T.row(m) -= c * T.row(i);
  }
}

}  // namespace

LPProblem LPProblem::with_variables(Index n) {
  LPProblem p;
  p.objective = Vector::Zero(n);
  p.ineq_coeffs = Matrix(0, n);
  p.ineq_rhs = Vector(0);
  p.eq_coeffs = Matrix(0, n);
  p.eq_rhs = Vector(0);
  p.lower = Vector::Constant(n, -kInf);
  p.upper = Vector::Constant(n, kInf);
  return p;
}

LPResult solve_small_lp(const LPProblem& problem) {
  const Index n = problem.objective.size();
  if (n <= 0 || n > 32)
    throw ConfigError("lp: variable count must be in 1..32");
  if (problem.ineq_coeffs.cols() != n || problem.eq_coeffs.cols() != n ||
      problem.ineq_coeffs.rows() != problem.ineq_rhs.size() ||
      problem.eq_coeffs.rows() != problem.eq_rhs.size() ||
      problem.lower.size() != n || problem.upper.size() != n)
    throw ConfigError("lp: inconsistent dimensions");
  for (Index j = 0; j < n; ++j)
    if (problem.lower[j] > problem.upper[j])
      throw ConfigError("lp: lower bound above upper bound");

  // Standard-form variables: one or two nonnegative columns per original
  // variable, x = offset + sign * u (+ optional negative part).
  struct VarMap {
    Index pos;           // column of the primary part
    Index neg = -1;      // column of the negative part (free variables)
    double offset = 0.0; // lo, or hi when flipped
    double sign = 1.0;   // -1 when substituting x = hi - u
    double range = kInf; // finite => extra row u <= range
  };
  std::vector<VarMap> vars(static_cast<std::size_t>(n));

  Index cols = 0;
  Index bound_rows = 0;
  for (Index j = 0; j < n; ++j) {
    auto& v = vars[static_cast<std::size_t>(j)];
    const double lo = problem.lower[j];
    const double hi = problem.upper[j];
    if (std::isfinite(lo)) {
      v.pos = cols++;
      v.offset = lo;
      v.sign = 1.0;
      if (std::isfinite(hi)) {
        v.range = hi - lo;
        ++bound_rows;
      }
    } else if (std::isfinite(hi)) {
      v.pos = cols++;
      v.offset = hi;
      v.sign = -1.0;
    } else {
      v.pos = cols++;
      v.neg = cols++;
    }
  }

  const Index n_ineq = problem.ineq_coeffs.rows();
  const Index n_eq = problem.eq_coeffs.rows();
  const Index m = n_ineq + bound_rows + n_eq;
  const Index n_slack = n_ineq + bound_rows;
  const Index n_total = cols + n_slack + m;  // + artificials

  Matrix A = Matrix::Zero(m, n_total);
  Vector b = Vector::Zero(m);
  Vector cost = Vector::Zero(n_total);

  const auto emit_row = [&](Index row, const Vector& coeffs, double rhs) {
    for (Index j = 0; j < n; ++j) {
      const auto& v = vars[static_cast<std::size_t>(j)];
      rhs -= coeffs[j] * v.offset;
      A(row, v.pos) += coeffs[j] * v.sign;
      if (v.neg >= 0) A(row, v.neg) -= coeffs[j];
    }
    b[row] = rhs;
  };

  Index row = 0;
  for (Index i = 0; i < n_ineq; ++i, ++row) {
    emit_row(row, problem.ineq_coeffs.row(i).transpose(), problem.ineq_rhs[i]);
    A(row, cols + row) = 1.0;  // slack
  }
  for (Index j = 0; j < n; ++j) {
    const auto& v = vars[static_cast<std::size_t>(j)];
    if (std::isfinite(v.range)) {
      A(row, v.pos) = 1.0;
      A(row, cols + row) = 1.0;
      b[row] = v.range;
      ++row;
    }
  }
  for (Index i = 0; i < n_eq; ++i, ++row)
    emit_row(row, problem.eq_coeffs.row(i).transpose(), problem.eq_rhs[i]);

  for (Index j = 0; j < n; ++j) {
    const auto& v = vars[static_cast<std::size_t>(j)];
    cost[v.pos] += problem.objective[j] * v.sign;
    if (v.neg >= 0) cost[v.neg] -= problem.objective[j];
  }

  // Phase 1: artificial basis, minimize artificial mass.
  Matrix T(m + 1, n_total + 1);
  T.setZero();
  std::vector<Index> basis(static_cast<std::size_t>(m));
  Vector phase1_cost = Vector::Zero(n_total);
  for (Index i = 0; i < m; ++i) {
    const double sign = b[i] < 0 ? -1.0 : 1.0;
    T.row(i).head(n_total) = sign * A.row(i);
    T(i, n_total) = sign * b[i];
    const Index art = cols + n_slack + i;
    T(i, art) = 1.0;
    basis[static_cast<std::size_t>(i)] = art;
    phase1_cost[art] = 1.0;
  }

  std::vector<bool> blocked(static_cast<std::size_t>(n_total), false);
  price_out(T, basis, phase1_cost);
  run_simplex(T, basis, blocked);  // phase 1 cannot be unbounded
  if (-T(m, n_total) > 1e-7) return LPResult{LPStatus::Infeasible, {}, 0.0};

  // Drive surviving artificials out of the basis; rows that cannot pivot are
  // redundant and harmless (their artificial stays at value 0, blocked).
  for (Index i = 0; i < m; ++i) {
    if (basis[static_cast<std::size_t>(i)] < cols + n_slack) continue;
    for (Index j = 0; j < cols + n_slack; ++j) {
      if (std::abs(T(i, j)) > kTol) {
        T.row(i) /= T(i, j);
        for (Index r = 0; r <= m; ++r) {
          if (r == i) continue;
          const double factor = T(r, j);
          if (factor != 0.0) T.row(r) -= factor * T.row(i);
        }
        basis[static_cast<std::size_t>(i)] = j;
        break;
      }
    }
  }
  for (Index j = cols + n_slack; j < n_total; ++j)
    blocked[static_cast<std::size_t>(j)] = true;

  price_out(T, basis, cost);
  if (run_simplex(T, basis, blocked) == SimplexOutcome::Unbounded)
    return LPResult{LPStatus::Unbounded, {}, 0.0};

  Vector std_values = Vector::Zero(n_total);
  for (Index i = 0; i < m; ++i)
    std_values[basis[static_cast<std::size_t>(i)]] = T(i, n_total);

  LPResult result;
  result.status = LPStatus::Optimal;
  result.point = Vector(n);
  for (Index j = 0; j < n; ++j) {
    const auto& v = vars[static_cast<std::size_t>(j)];
    double x = v.offset + v.sign * std_values[v.pos];
    if (v.neg >= 0) x -= std_values[v.neg];
    result.point[j] = x;
  }
  result.objective = problem.objective.dot(result.point);
  return result;
}

}  // namespace fairpoison
