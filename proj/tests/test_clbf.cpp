#include "test_support.hpp"

#include "clbf/clbf.hpp"

#include <doctest.h>

#include <sstream>

using namespace clbf;
using testing::state;

TEST_CASE("coefficients for the case-study obstacles") {
  const auto cfg = testing::table1();
  const ClbfCoefficients c = compute_coefficients(cfg.clf, cfg.barriers, 8.5, 10, cfg.clbf.k_lambda);
  const double d1 = std::sqrt(30.0 * 30 + 25 * 25);
  CHECK(c.c3[0] == doctest::Approx((d1 + 6) * (d1 + 6)));
  CHECK(c.c3[0] == doctest::Approx(2029.6).epsilon(1e-4));
  CHECK(c.c4[0] == doctest::Approx(1159.5).epsilon(1e-4));
  CHECK(c.lambda[0] == doctest::Approx((10 * c.c3[0] - 8.5 * c.c4[0]) / 10 + 1e5));
  for (std::size_t i = 0; i < cfg.barriers.size(); ++i) {
    CHECK(c.eta[i] == 10.0);
    CHECK(c.lambda[i] > (10 * c.c3[i] - 8.5 * c.c4[i]) / c.eta[i]);
  }
  CHECK(c.kappa_lower < c.kappa);
  CHECK(c.kappa < c.kappa_upper);
  CHECK(c.kappa == doctest::Approx(0.5 * (c.kappa_lower + c.kappa_upper)));
}

TEST_CASE("single obstacle window is never empty") {
  BarrierSpec b;
  b.center = {40, 10};
  const ClbfCoefficients c = compute_coefficients(ClfParams{}, {b}, 8.5, 10, {1e-3});
  CHECK(c.kappa_lower == doctest::Approx(-8.5 * c.c4[0]));
  CHECK(c.kappa_upper == doctest::Approx(c.lambda[0] * 10 - 10 * c.c3[0]));
  CHECK(c.kappa_lower < c.kappa_upper);
}

TEST_CASE("empty kappa window names the obstacle") {
  auto cfg = testing::table1();
  cfg.clbf.k_lambda = {1e-3, 1e-3, 1e-3, 1e-3};
  try {
    ClbfAssembly(cfg.clf, cfg.barriers, cfg.clbf);
    FAIL("expected an assembly error");
  } catch (const ClbfAssemblyError& e) {
    CHECK(e.obstacle() >= 0);
    CHECK(e.obstacle() < 4);
  }
  CHECK_THROWS_AS(compute_coefficients(cfg.clf, cfg.barriers, 10, 8.5, cfg.clbf.k_lambda), std::invalid_argument);
}

TEST_CASE("sign structure inside D and on the outer boundary") {
  const auto W = testing::table1_assembly();
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0, 1);
  for (const BarrierSpec& b : W.barriers()) {
    for (int k = 0; k < 1000; ++k) {
      // Uniform over the disc, open at its rim.
      const Vector inside = testing::state_at_F(b, b.l_D * unit(rng) * (1 - 1e-12), rng);
      CHECK(W.value(inside) > 0);
      CHECK(W.in_unsafe(inside));
      const Vector rim = testing::state_at_F(b, b.l_X, rng);
      CHECK(W.value(rim) < 0);
    }
  }
}

TEST_CASE("minimum at the origin") {
  const auto W = testing::table1_assembly();
  const FieldSample s = W.evaluate(state(0, 0, 0.4));
  CHECK(s.gradient.isZero(0.0));
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(s.hessian).eigenvalues().minCoeff() >= -1e-12);
  CHECK(W.origin_value() == doctest::Approx(s.value).epsilon(1e-14));
  std::mt19937_64 rng(37);
  for (int k = 0; k < 10000; ++k) CHECK(W.value(testing::random_state(rng)) >= W.origin_value());
}

TEST_CASE("assembled field is the weighted sum of its parts") {
  const auto W = testing::table1_assembly();
  const ScalarField2 field = clbf_field(W);
  std::mt19937_64 rng(41);
  for (int k = 0; k < 1000; ++k) {
    const Vector x = testing::random_state(rng);
    double sum = clf_sample(x, W.clf_params()).value + W.kappa();
    double mag = std::abs(clf_sample(x, W.clf_params()).value) + std::abs(W.kappa());
    for (std::size_t i = 0; i < W.barriers().size(); ++i) {
      const double term = W.lambda()[i] * barrier_sample(W.barriers()[i], x).value;
      sum += term;
      mag += std::abs(term);
    }
    CHECK(std::abs(field.value(x) - sum) <= 1e-9 * mag);
    CHECK(W.value(x) == doctest::Approx(field.value(x)).epsilon(1e-12));
  }

  // Far from every support all barriers sit at B_min.
  double far = clf_sample(state(-15, -15, 0), W.clf_params()).value + W.kappa();
  for (std::size_t i = 0; i < W.barriers().size(); ++i) far -= W.lambda()[i] * W.barriers()[i].eta();
  CHECK(W.value(state(-15, -15, 0)) == doctest::Approx(far));
}

TEST_CASE("assembled derivatives match finite differences") {
  const auto W = testing::table1_assembly();
  const auto value = [&](const Vector& x) { return W.value(x); };
  const auto gradient = [&](const Vector& x) { return W.evaluate(x).gradient; };
  std::mt19937_64 rng(43);
  int checked = 0;
  while (checked < 1000) {
    const Vector x = testing::random_state(rng);
    if (!testing::away_from_barrier_ends(W, x)) continue;
    const FieldSample s = W.evaluate(x);
    CHECK(testing::relative_error(testing::fd_gradient(value, x), s.gradient,
                                  testing::roundoff_floor(std::abs(s.value), x)) < 1e-5);
    CHECK(testing::relative_error(testing::fd_jacobian(gradient, x), s.hessian,
                                  testing::roundoff_floor(s.gradient.cwiseAbs().maxCoeff(), x)) < 1e-4);
    ++checked;
  }
}

TEST_CASE("universal formula") {
  const auto W = testing::table1_assembly();
  const auto sys = testing::table1_system();
  const InputBox box = testing::table1_box();

  SUBCASE("zero gain returns the box centre") {
    UniversalTerms t;
    t.a = 3;
    t.b = RowVector::Zero(2);
    CHECK(universal_formula(t, box).isZero(0.0));
  }

  SUBCASE("certificate on sampled states of X_phi") {
    std::mt19937_64 rng(47);
    int found = 0, tries = 0;
    while (found < 2000 && tries < 200000) {
      ++tries;
      const Vector x = testing::random_state(rng);
      if (!region_membership(W, sys, box, x).in_X_phi || x.head<2>().norm() == 0) continue;
      ++found;
      const Vector u = universal_formula(W, sys, box, x);
      CHECK(box.contains(u));

      // Independent recomputation of the terms from the field and the generator.
      const FieldSample s = W.evaluate(x);
      const double Vc = s.value - W.origin_value();
      const RowVector b = s.gradient * sys.input_matrix(x) * box.half_range().asDiagonal();
      const double bound = -W.rho() * Vc / (1 + std::sqrt(1 + b.squaredNorm()));
      const double gen = generator(s, sys, x, u);
      CHECK(gen < 0);
      CHECK(gen <= bound + 1e-9 * (std::abs(bound) + std::abs(s.value)));
    }
    CHECK(found == 2000);
  }

  SUBCASE("normalised correction stays in the unit box") {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> d(-100, 100);
    for (int k = 0; k < 1000; ++k) {
      UniversalTerms t;
      t.a = -std::abs(d(rng));
      t.b = RowVector(2);
      t.b << d(rng), d(rng);
      const Vector K = (universal_formula(t, box) - box.mean()).cwiseQuotient(box.half_range());
      CHECK(K.cwiseAbs().maxCoeff() <= 1 + 1e-12);
    }
  }
}

TEST_CASE("vertex minimiser picks the box corner against the gain") {
  const InputBox box = testing::table1_box();
  RowVector g(2);
  g << 2, -3;
  const Vector u = vertex_minimizer(g, box);
  CHECK(u(0) == -10.0);
  CHECK(u(1) == doctest::Approx(M_PI / 2));
}

TEST_CASE("region membership") {
  const auto W = testing::table1_assembly();
  const auto sys = testing::table1_system();
  const InputBox box = testing::table1_box();

  const RegionFlags centre = region_membership(W, sys, box, state(30, 25, 0));
  CHECK(centre.in_D);
  CHECK(centre.in_D_relaxed);
  CHECK(centre.in_X[0]);
  CHECK_FALSE(centre.in_X_phi);
  CHECK(region_membership(W, sys, box, state(100, 80, -M_PI / 2)).in_X_L);

  std::mt19937_64 rng(59);
  for (int k = 0; k < 5000; ++k) {
    const RegionFlags f = region_membership(W, sys, box, testing::random_state(rng));
    if (f.in_X_phi) CHECK(f.in_X_L);
  }
}

TEST_CASE("grid scan") {
  const auto W = testing::table1_assembly();
  const auto sys = testing::table1_system();
  GridSpec grid;
  grid.nx = 30;
  grid.ny = 25;
  grid.thetas = GridSpec::uniform_thetas(4);
  const RegionRaster r = region_grid_scan(W, sys, testing::table1_box(), grid);
  REQUIRE(r.nx == 30);
  REQUIRE(r.ny == 25);
  REQUIRE(r.cells.size() == 750u);
  CHECK(r.at(3, 7).x == doctest::Approx(grid.x_at(3)));
  CHECK(r.at(3, 7).y == doctest::Approx(grid.y_at(7)));
  for (const RasterCell& c : r.cells) {
    if (c.in_X_phi) {
      CHECK(c.in_X_L);
      CHECK_FALSE(c.in_D);
    }
    if (c.in_D) CHECK(c.in_D_relaxed);
  }
  // Cells well outside every support, away from the origin.
  for (const RasterCell& c : r.cells) {
    bool far = std::hypot(c.x, c.y) > 20;
    for (const BarrierSpec& b : W.barriers()) far = far && (Eigen::Vector2d(c.x, c.y) - b.center).norm() > 15;
    if (far) CHECK(c.in_X_L);
  }

  std::ostringstream csv;
  write_raster_csv(r, csv);
  const std::string text = csv.str();
  CHECK(text.rfind("# x,y,in_D,in_D_relaxed,in_X_phi,in_X_L\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 751);

  grid.thetas.clear();
  CHECK_THROWS_AS(region_grid_scan(W, sys, testing::table1_box(), grid), std::invalid_argument);
}
