#pragma once

#include "clbf/sde_model.hpp"

namespace clbf {

/// min 1/2 x'Hx + q'x  s.t.  G x <= h,  lower <= x <= upper
///
/// H must be symmetric positive semidefinite. Infinite bounds are ignored.
struct QpProblem {
  Matrix H;
  Vector q;
  Matrix G;
  Vector h;
  Vector lower;
  Vector upper;
};

struct QpOptions {
  int max_iter{80};
  double tol{1e-9};
  double regularization{1e-10};
};

struct QpResult {
  Vector x;
  Vector z;        ///< multipliers of G x <= h
  Vector z_lower;  ///< multipliers of the lower bounds (0 where unbounded)
  Vector z_upper;
  int iterations{0};
  bool converged{false};
};

/// Dense Mehrotra predictor-corrector interior point method.
QpResult solve_qp(const QpProblem& problem, const QpOptions& options = {});

}  // namespace clbf
