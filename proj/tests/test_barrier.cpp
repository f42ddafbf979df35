#include "test_support.hpp"

#include "clbf/barrier.hpp"

#include <doctest.h>

using namespace clbf;
using testing::state;

namespace {

BarrierSpec obstacle1() { return testing::table1().barriers.front(); }

}  // namespace

TEST_CASE("squared distance to the centre") {
  const BarrierSpec b = obstacle1();
  CHECK(obstacle_F(b, state(30, 25, 1)).value == 0.0);
  CHECK(obstacle_F(b, state(30, 30, 0)).value == 25.0);
  CHECK(obstacle_F(b, state(36, 25, 0)).value == 36.0);
  const FieldSample s = obstacle_F(b, state(33, 21, 2));
  CHECK(s.gradient(0) == 6.0);
  CHECK(s.gradient(1) == -8.0);
  CHECK(s.gradient(2) == 0.0);
  CHECK(s.hessian.diagonal().isApprox(Eigen::Vector3d(2, 2, 0)));
}

TEST_CASE("decay-rate schedule") {
  const BarrierSpec b = obstacle1();
  CHECK(kb_schedule(b, 0).k == doctest::Approx(90.1));
  CHECK(kb_schedule(b, b.l_X).k == doctest::Approx(0.1));
  CHECK_THROWS_AS(kb_schedule(b, -1e-9), std::domain_error);
  CHECK_THROWS_AS(kb_schedule(b, b.l_X * (1 + 1e-9)), std::domain_error);

  double prev = kb_schedule(b, 0).k;
  for (int i = 1; i <= 1000; ++i) {
    const double k = kb_schedule(b, b.l_X * i / 1000.0).k;
    CHECK(k <= prev);
    prev = k;
  }

  // dk/dF and d2k/dF2 against differences of k.
  for (double F : {3.0, 12.0, 30.0}) {
    const double h = 1e-3;
    const KbSample s = kb_schedule(b, F);
    const double kp = kb_schedule(b, F + h).k, km = kb_schedule(b, F - h).k;
    CHECK(s.dk == doctest::Approx((kp - km) / (2 * h)).epsilon(1e-7));
    CHECK(s.d2k == doctest::Approx((kp - 2 * s.k + km) / (h * h)).epsilon(1e-5));
  }
}

TEST_CASE("barrier values at the landmarks") {
  for (const BarrierSpec& b : testing::table1().barriers) {
    const Vector c = state(b.center.x(), b.center.y(), 0.3);
    CHECK(barrier_sample(b, c).value == 15.0);
    CHECK(barrier_sample(b, c).gradient.isZero(0.0));
    CHECK(barrier_value_at(b, b.l_D) == doctest::Approx(2.5).epsilon(1e-14));
    for (double F : {b.l_X, b.l_X + 1e-9, 2 * b.l_X, 1e6}) {
      const Vector x = state(b.center.x() + std::sqrt(F), b.center.y(), 0);
      const FieldSample s = barrier_sample(b, x);
      CHECK(s.value == -10.0);
      CHECK(s.gradient.isZero(0.0));
      CHECK(s.hessian.isZero(0.0));
    }
  }
}

TEST_CASE("boundary smoothness") {
  SUBCASE("scheduled rate") {
    const SmoothnessReport r = verify_boundary_smoothness(obstacle1(), 1e-6);
    CHECK(r.passed);
    CHECK(r.rings.size() == 7);
    CHECK(r.boundary_gradient_norm == 0.0);
    CHECK(r.boundary_hessian_norm == 0.0);
    // The slope peaks inside the band, then collapses towards the rim.
    for (std::size_t i = 3; i < r.rings.size(); ++i) {
      CHECK(r.rings[i].max_gradient_norm <= r.rings[i - 1].max_gradient_norm);
    }
  }
  SUBCASE("constant rate") {
    BarrierSpec b = obstacle1();
    b.kb_a = 0;
    CHECK(verify_boundary_smoothness(b, 1e-6).passed);
  }
}

TEST_CASE("barrier depends on the state only through F") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> frac(0, 1.2), ang(-M_PI, M_PI);
  for (const BarrierSpec& b : testing::table1().barriers) {
    for (int k = 0; k < 250; ++k) {
      const double F = frac(rng) * b.l_X, r = std::sqrt(F);
      const double p1 = ang(rng), p2 = ang(rng);
      const Vector x1 = state(b.center.x() + r * std::cos(p1), b.center.y() + r * std::sin(p1), ang(rng));
      const Vector x2 = state(b.center.x() + r * std::cos(p2), b.center.y() + r * std::sin(p2), ang(rng));
      const double v1 = barrier_sample(b, x1).value, v2 = barrier_sample(b, x2).value;
      CHECK(std::abs(v1 - v2) <= 1e-12 * std::max(1.0, std::abs(v1)));
    }
  }
}

TEST_CASE("monotone in F with a single sign change beyond D") {
  for (const BarrierSpec& b : testing::table1().barriers) {
    double prev = barrier_value_at(b, 0.0);
    double last_positive = 0;
    for (int i = 1; i < 10000; ++i) {
      const double F = b.l_X * i / 10000.0;
      const double v = barrier_value_at(b, F);
      CHECK(v <= prev);
      if (v > 0) last_positive = F;
      if (F < b.l_D) CHECK(v > 0);
      prev = v;
    }
    CHECK(last_positive > b.l_D);
    CHECK(last_positive < b.l_X);
  }
}

TEST_CASE("analytic derivatives match finite differences in the band") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> band(0.05, 0.95);
  for (const BarrierSpec& b : testing::table1().barriers) {
    const auto value = [&](const Vector& x) { return barrier_sample(b, x).value; };
    const auto gradient = [&](const Vector& x) { return barrier_sample(b, x).gradient; };
    for (int k = 0; k < 250; ++k) {
      const Vector x = testing::state_at_F(b, band(rng) * b.l_X, rng);
      const FieldSample s = barrier_sample(b, x);
      CHECK(s.hessian.isApprox(s.hessian.transpose(), 1e-12));
      CHECK(testing::relative_error(testing::fd_gradient(value, x), s.gradient,
                                    testing::roundoff_floor(std::abs(s.value), x)) < 1e-5);
      CHECK(testing::relative_error(testing::fd_jacobian(gradient, x), s.hessian,
                                    testing::roundoff_floor(s.gradient.cwiseAbs().maxCoeff(), x)) < 1e-4);
    }
  }
}

TEST_CASE("overflow guard returns the saturated limits") {
  const BarrierSpec b = obstacle1();
  // Tiny F: exponent -> -inf, B -> B_max with vanishing slope.
  const FieldSample near_centre = barrier_sample(b, state(30 + 1e-4, 25, 0));
  CHECK(near_centre.value == doctest::Approx(15.0));
  CHECK(std::isfinite(near_centre.hessian.norm()));
  const FieldSample near_edge = barrier_sample(b, testing::state(30 + std::sqrt(36 - 1e-6), 25, 0));
  CHECK(near_edge.value == doctest::Approx(-10.0));
  CHECK(near_edge.gradient.norm() < 1e-6);
  CHECK(std::isfinite(near_edge.hessian.norm()));
}
