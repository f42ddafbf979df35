#include "clbf/clf.hpp"

#include <algorithm>

namespace clbf {

std::string to_string(ClfCondition c) {
  switch (c) {
    case ClfCondition::kPositiveEntries:
      return "p1, p2, p3 > 0";
    case ClfCondition::kPositiveDefinite:
      return "p1*p3 - p2^2 > 0";
    case ClfCondition::kNoiseMargin:
      return "p2/p3 - (sigma1^2 + sigma2^2)/r_g^2 > 0";
    case ClfCondition::kP1LowerBound:
      return "p1 > max(p2^2 r_g^2 sigma3^2 / (2 p2 r_g^2 - 2 p3 (sigma1^2 + sigma2^2)), 2 p2^2/p3 + p2 sigma3^2/2)";
  }
  return "unknown";
}

std::vector<ClfCondition> validate_clf_params(const ClfParams& p, const UnicycleParams& noise) {
  std::vector<ClfCondition> violated;
  const double s12 = noise.sigma1 * noise.sigma1 + noise.sigma2 * noise.sigma2;
  const double s3 = noise.sigma3 * noise.sigma3;
  const double rg2 = noise.goal_radius * noise.goal_radius;

  if (!(p.p1 > 0 && p.p2 > 0 && p.p3 > 0)) violated.push_back(ClfCondition::kPositiveEntries);
  if (!(p.p1 * p.p3 - p.p2 * p.p2 > 0)) violated.push_back(ClfCondition::kPositiveDefinite);
  if (!(p.p2 / p.p3 - s12 / rg2 > 0)) violated.push_back(ClfCondition::kNoiseMargin);

  const double bound_a = p.p2 * p.p2 * rg2 * s3 / (2 * p.p2 * rg2 - 2 * p.p3 * s12);
  const double bound_b = 2 * p.p2 * p.p2 / p.p3 + 0.5 * p.p2 * s3;
  if (!(p.p1 > std::max(bound_a, bound_b))) violated.push_back(ClfCondition::kP1LowerBound);
  return violated;
}

double minimizing_p(const Vector& state, const ClfParams& p) { return minimizing_p(state(0), state(1), state(2), p); }

FieldSample clf_sample(const Vector& state, const ClfParams& p) {
  const double x = state(0), y = state(1), th = state(2);
  const double ct = std::cos(th), st = std::sin(th);
  const double k = p.p2 * p.p2 / p.p3;
  const double c = x * ct + y * st;   // d/dtheta c = s
  const double s = -x * st + y * ct;  // d/dtheta s = -c

  FieldSample out;
  out.value = p.p1 * (x * x + y * y) - k * c * c;
  out.gradient.resize(3);
  out.gradient << 2 * p.p1 * x - 2 * k * c * ct, 2 * p.p1 * y - 2 * k * c * st, -2 * k * c * s;

  out.hessian.resize(3, 3);
  const double hxx = 2 * p.p1 - 2 * k * ct * ct;
  const double hyy = 2 * p.p1 - 2 * k * st * st;
  const double hxy = -2 * k * ct * st;
  const double hxt = -2 * k * (s * ct - c * st);
  const double hyt = -2 * k * (s * st + c * ct);
  const double htt = -2 * k * (s * s - c * c);
  out.hessian << hxx, hxy, hxt,
                 hxy, hyy, hyt,
                 hxt, hyt, htt;
  return out;
}

ScalarField2 clf_field(const ClfParams& p) {
  return ScalarField2(3, [p](const Vector& x) { return clf_sample(x, p); });
}

}  // namespace clbf
