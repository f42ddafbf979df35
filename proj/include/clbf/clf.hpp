#pragma once

#include "clbf/sde_model.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace clbf {

/// Entries of the weight matrix of the quadratic Lyapunov function used on
/// the feedback-linearised unicycle. With z = (x, y, v cos(theta), v sin(theta))
///
///       [p1  0 p2  0]
///   P = [ 0 p1  0 p2]
///       [p2  0 p3  0]
///       [ 0 p2  0 p3]
struct ClfParams {
  double p1{10.0};
  double p2{1.0};
  double p3{1.0};
};

enum class ClfCondition {
  kPositiveEntries,   ///< p1, p2, p3 > 0
  kPositiveDefinite,  ///< p1 p3 - p2^2 > 0
  kNoiseMargin,       ///< p2/p3 - (s1^2 + s2^2)/r_g^2 > 0
  kP1LowerBound,      ///< p1 above both noise-dependent bounds
};

std::string to_string(ClfCondition c);

/// Returns every violated inequality; empty means the quadratic function is
/// an unconstrained stochastic CLF for the unicycle with these noise levels.
std::vector<ClfCondition> validate_clf_params(const ClfParams& p, const UnicycleParams& noise);

/// x cos(theta) + y sin(theta): position projected on the heading.
template <typename Scalar>
Scalar heading_projection(Scalar x, Scalar y, Scalar theta) {
  using std::cos;
  using std::sin;
  return x * cos(theta) + y * sin(theta);
}

/// Quadratic form of the augmented state (x, y, theta, v):
/// p1 (x^2 + y^2) + 2 p2 v (x cos + y sin) + p3 v^2.
template <typename Scalar>
Scalar augmented_clf_value(Scalar x, Scalar y, Scalar theta, Scalar v, const ClfParams& p) {
  const Scalar c = heading_projection(x, y, theta);
  return p.p1 * (x * x + y * y) + 2 * p.p2 * v * c + p.p3 * v * v;
}

/// Velocity minimising the augmented quadratic form for a fixed pose.
template <typename Scalar>
Scalar minimizing_p(Scalar x, Scalar y, Scalar theta, const ClfParams& p) {
  return -(p.p2 / p.p3) * heading_projection(x, y, theta);
}

double minimizing_p(const Vector& state, const ClfParams& p);

/// V(x, y, theta) = p1 (x^2 + y^2) - (p2^2 / p3) (x cos(theta) + y sin(theta))^2
FieldSample clf_sample(const Vector& state, const ClfParams& p);
ScalarField2 clf_field(const ClfParams& p);

}  // namespace clbf
