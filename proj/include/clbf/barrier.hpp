#pragma once

#include "clbf/sde_model.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace clbf {

/// One circular obstacle and the sigmoid barrier built around it.
///
/// D = {F < l_D} is the unsafe disc, X = {F < l_X} the support of the
/// barrier, F = (x - x_obs)^2 + (y - y_obs)^2. The barrier decay rate
/// follows k_B(F) = a cos(2 pi F / (3 l_X)) + a/2 + b; a = 0 gives a constant
/// rate b.
struct BarrierSpec {
  Eigen::Vector2d center{0.0, 0.0};
  double l_D{25.0};
  double l_X{36.0};
  double B_min{-10.0};
  double B_max{15.0};
  double kb_a{60.0};
  double kb_b{0.1};

  bool valid() const {
    return 0 < l_D && l_D < l_X && B_min < 0 && B_max > 0 && B_max + B_min > 0 && kb_a >= 0 && kb_b > 0;
  }
  /// eta = -B_min, the constant depth of the barrier outside X.
  double eta() const { return -B_min; }
};

/// Squared distance to the obstacle centre with its derivatives.
FieldSample obstacle_F(const BarrierSpec& spec, const Vector& state);

struct KbSample {
  double k{0};
  double dk{0};   ///< dk/dF
  double d2k{0};  ///< d2k/dF2
};

/// Decay-rate schedule; throws std::domain_error for F outside [0, l_X].
KbSample kb_schedule(const BarrierSpec& spec, double F);

/// Barrier value at F for a given decay rate k.
template <typename Scalar>
Scalar barrier_value_for_rate(const BarrierSpec& spec, Scalar F, Scalar k) {
  using std::exp;
  if (F >= spec.l_X) return Scalar(spec.B_min);
  if (F <= 0) return Scalar(spec.B_max);
  const Scalar exponent = -k * (Scalar(spec.l_D) - F) / (F * (Scalar(spec.l_X) - F));
  if (exponent > 700) return Scalar(spec.B_min);
  if (exponent < -700) return Scalar(spec.B_max);
  return Scalar(spec.B_min) + Scalar(spec.B_max - spec.B_min) / (1 + exp(exponent));
}

/// Barrier value as a function of F alone (B depends on state only through F).
template <typename Scalar>
Scalar barrier_value_at(const BarrierSpec& spec, Scalar F) {
  using std::cos;
  if (F >= spec.l_X || F <= 0) return barrier_value_for_rate(spec, F, Scalar(0));
  const Scalar omega = Scalar(2 * M_PI / 3) / Scalar(spec.l_X);
  const Scalar k = Scalar(spec.kb_a) * cos(omega * F) + Scalar(spec.kb_a / 2) + Scalar(spec.kb_b);
  return barrier_value_for_rate(spec, F, k);
}

FieldSample barrier_sample(const BarrierSpec& spec, const Vector& state);
ScalarField2 barrier_field(const BarrierSpec& spec);

/// Magnitudes of the barrier derivatives on rings approaching the outer
/// boundary, F = l_X (1 - 10^-k).
struct SmoothnessReport {
  struct Ring {
    int exponent{0};
    double F{0};
    double max_gradient_norm{0};
    double max_hessian_norm{0};
  };
  std::vector<Ring> rings;
  double boundary_gradient_norm{0};  ///< evaluated exactly on F = l_X
  double boundary_hessian_norm{0};
  bool passed{false};
};

SmoothnessReport verify_boundary_smoothness(const BarrierSpec& spec, double tol, int angles = 64);

}  // namespace clbf
