#pragma once

#include "fairpoison/common.hpp"

namespace fairpoison {

/// Dense linear program
///   minimize    objective . x
///   subject to  ineq_coeffs x <= ineq_rhs
///               eq_coeffs   x  = eq_rhs
///               lower <= x <= upper   (entries may be +-infinity)
/// Sized for a handful of variables (<= 32); solved exactly by a two-phase
/// tableau simplex with Bland's rule.
struct LPProblem {
  Vector objective;
  Matrix ineq_coeffs;  // may have zero rows
  Vector ineq_rhs;
  Matrix eq_coeffs;  // may have zero rows
  Vector eq_rhs;
  Vector lower;
  Vector upper;

  static LPProblem with_variables(Index n);
};

enum class LPStatus { Optimal, Infeasible, Unbounded };

struct LPResult {
  LPStatus status = LPStatus::Infeasible;
  Vector point;       // valid when Optimal: an optimal vertex
  double objective = 0.0;
};

/// Feasibility tolerance 1e-9. Throws ConfigError on inconsistent dimensions
/// or more than 32 variables; infeasible/unbounded are reported in the result.
LPResult solve_small_lp(const LPProblem& problem);

}  // namespace fairpoison
