#include "clbf/barrier.hpp"

#include <algorithm>
#include <utility>

namespace clbf {

namespace {

constexpr double kExponentLimit = 700.0;

// q = 1 / (1 + exp(E)) and 1 - q, each formed without cancellation.
std::pair<double, double> logistic_pair(double E) {
  if (E > 0) {
    const double t = std::exp(-E);
    return {t / (1 + t), 1 / (1 + t)};
  }
  const double t = std::exp(E);
  return {1 / (1 + t), t / (1 + t)};
}

FieldSample constant_sample(double value) {
  FieldSample s = FieldSample::zero(3);
  s.value = value;
  return s;
}

}  // namespace

FieldSample obstacle_F(const BarrierSpec& spec, const Vector& state) {
  const double dx = state(0) - spec.center.x();
  const double dy = state(1) - spec.center.y();
  FieldSample s = FieldSample::zero(3);
  s.value = dx * dx + dy * dy;
  s.gradient << 2 * dx, 2 * dy, 0;
  s.hessian(0, 0) = 2;
  s.hessian(1, 1) = 2;
  return s;
}

KbSample kb_schedule(const BarrierSpec& spec, double F) {
  if (!(F >= 0 && F <= spec.l_X)) throw std::domain_error("kb_schedule: F outside [0, l_X]");
  const double w = 2 * M_PI / (3 * spec.l_X);
  const double c = std::cos(w * F);
  const double s = std::sin(w * F);
  return {spec.kb_a * c + 0.5 * spec.kb_a + spec.kb_b, -spec.kb_a * w * s, -spec.kb_a * w * w * c};
}

// B = B_min + (B_max - B_min) / (1 + e1),  e1 = exp(-k (l_D - F) / (F (l_X - F)))
//
// Derivatives follow the e1..e5 decomposition with
//   e2 = F^2 - 2 l_D F + l_D l_X,  e3 = F^2 (l_X - F)^2,  e4 = (l_D - F) / (F (l_X - F)),
// and k_B entering through F, so grad k = k'(F) grad F. The sigmoid weights
// e1/(1+e1)^2 and e5 are evaluated through q = 1/(1+e1) to stay finite for
// large exponents.
FieldSample barrier_sample(const BarrierSpec& spec, const Vector& state) {
  const FieldSample Fs = obstacle_F(spec, state);
  const double F = Fs.value;
  if (F >= spec.l_X) return constant_sample(spec.B_min);
  // Centre of the obstacle: the sigmoid is flat to all orders there.
  if (F <= 0) return constant_sample(spec.B_max);

  const double lD = spec.l_D, lX = spec.l_X;
  const KbSample kb = kb_schedule(spec, F);
  const double k = kb.k;
  const double e2 = F * F - 2 * lD * F + lD * lX;
  const double e3 = F * F * (lX - F) * (lX - F);
  const double e4 = (lD - F) / (F * (lX - F));
  const double exponent = -k * e4;
  if (exponent > kExponentLimit) return constant_sample(spec.B_min);
  if (exponent < -kExponentLimit) return constant_sample(spec.B_max);

  const double range = spec.B_max - spec.B_min;
  const auto [q, qc] = logistic_pair(exponent);
  const double w = range * q * qc;             // range e1 / (1 + e1)^2
  const double e5 = range * q * qc * (qc - q);  // 2 range e1^2 / (1 + e1)^3 - w

  const RowVector& dF = Fs.gradient;
  const RowVector dk = kb.dk * dF;
  const Matrix d2k = kb.d2k * dF.transpose() * dF + kb.dk * Fs.hessian;

  const double kr = k * e2 / e3;
  FieldSample out;
  out.value = spec.B_min + range * q;
  out.gradient = -w * (kr * dF - e4 * dk);

  const double ff = e5 * kr * kr - w * (k / (e3 * e3)) * (2 * e3 * (F - lD) - 2 * e2 * F * (F - lX) * (2 * F - lX));
  const double fk = -e5 * k * e2 * e4 / e3 - w * e2 / e3;
  const Matrix cross = dF.transpose() * dk;
  out.hessian = ff * dF.transpose() * dF + fk * (cross + cross.transpose()) + e5 * e4 * e4 * dk.transpose() * dk -
                w * kr * Fs.hessian + w * e4 * d2k;
  return out;
}

ScalarField2 barrier_field(const BarrierSpec& spec) {
  return ScalarField2(3, [spec](const Vector& x) { return barrier_sample(spec, x); });
}

SmoothnessReport verify_boundary_smoothness(const BarrierSpec& spec, double tol, int angles) {
  SmoothnessReport report;
  for (int e = 2; e <= 8; ++e) {
    SmoothnessReport::Ring ring;
    ring.exponent = e;
    ring.F = spec.l_X * (1 - std::pow(10.0, -e));
    const double radius = std::sqrt(ring.F);
    for (int j = 0; j < angles; ++j) {
      const double phi = 2 * M_PI * j / angles;
      Vector x(3);
      x << spec.center.x() + radius * std::cos(phi), spec.center.y() + radius * std::sin(phi), phi;
      const FieldSample s = barrier_sample(spec, x);
      ring.max_gradient_norm = std::max(ring.max_gradient_norm, s.gradient.norm());
      ring.max_hessian_norm = std::max(ring.max_hessian_norm, s.hessian.norm());
    }
    report.rings.push_back(ring);
  }
  Vector on(3);
  on << spec.center.x() + std::sqrt(spec.l_X), spec.center.y(), 0.0;
  const FieldSample b = barrier_sample(spec, on);
  report.boundary_gradient_norm = b.gradient.norm();
  report.boundary_hessian_norm = b.hessian.norm();
  const auto& inner = report.rings.back();
  report.passed = inner.max_gradient_norm < tol && inner.max_hessian_norm < tol;
  return report;
}

}  // namespace clbf
