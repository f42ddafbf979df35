#include "clbf/clbf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>

namespace clbf {

ClbfCoefficients compute_coefficients(const ClfParams&, const std::vector<BarrierSpec>& barriers, double c1,
                                      double c2, const std::vector<double>& k_lambda) {
  const std::size_t n = barriers.size();
  if (k_lambda.size() != n) throw std::invalid_argument("compute_coefficients: one K_lambda per barrier required");
  if (!(c2 > c1 && c1 > 0)) throw std::invalid_argument("compute_coefficients: need c2 > c1 > 0");

  ClbfCoefficients out;
  for (std::size_t i = 0; i < n; ++i) {
    const BarrierSpec& b = barriers[i];
    if (!b.valid()) throw std::invalid_argument("compute_coefficients: invalid barrier " + std::to_string(i));
    if (!(k_lambda[i] > 0)) throw std::invalid_argument("compute_coefficients: K_lambda must be positive");
    const double d = b.center.norm();
    const double c3 = std::pow(d + std::sqrt(b.l_X), 2);
    const double c4 = std::pow(std::max(0.0, d - std::sqrt(b.l_D)), 2);
    out.eta.push_back(b.eta());
    out.c3.push_back(c3);
    out.c4.push_back(c4);
    out.lambda.push_back((c2 * c3 - c1 * c4) / b.eta() + k_lambda[i]);
  }
  if (n == 0) return out;

  double total = 0;
  for (std::size_t i = 0; i < n; ++i) total += out.lambda[i] * out.eta[i];

  int worst = 0;
  out.kappa_lower = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double lower = total - out.lambda[i] * out.eta[i] - c1 * out.c4[i];
    if (lower > out.kappa_lower) {
      out.kappa_lower = lower;
      worst = static_cast<int>(i);
    }
  }
  out.kappa_upper = total - c2 * *std::max_element(out.c3.begin(), out.c3.end());
  if (!(out.kappa_lower < out.kappa_upper)) {
    throw ClbfAssemblyError("empty kappa window: lower bound from obstacle " + std::to_string(worst) +
                                " (" + std::to_string(out.kappa_lower) + ") is not below the upper bound (" +
                                std::to_string(out.kappa_upper) + ")",
                            worst);
  }
  out.kappa = 0.5 * (out.kappa_lower + out.kappa_upper);
  return out;
}

ClbfAssembly::ClbfAssembly(const ClfParams& clf, std::vector<BarrierSpec> barriers, const ClbfOptions& options)
    : clf_params_(clf),
      clf_(clf_field(clf)),
      barriers_(std::move(barriers)),
      c1_(options.c1),
      c2_(options.c2),
      rho_(options.rho) {
  if (!(rho_ > 0)) throw std::invalid_argument("ClbfAssembly: rho must be positive");
  coeffs_ = compute_coefficients(clf, barriers_, c1_, c2_, options.k_lambda);
  origin_value_ = value(Vector::Zero(3));
}

FieldSample ClbfAssembly::evaluate(const Vector& x) const {
  FieldSample s = clf_sample(x, clf_params_);
  for (std::size_t i = 0; i < barriers_.size(); ++i) s += coeffs_.lambda[i] * barrier_sample(barriers_[i], x);
  s.value += coeffs_.kappa;
  return s;
}

double ClbfAssembly::value(const Vector& x) const {
  double v = clf_sample(x, clf_params_).value + coeffs_.kappa;
  for (std::size_t i = 0; i < barriers_.size(); ++i) {
    const double F = (x.head<2>() - barriers_[i].center).squaredNorm();
    v += coeffs_.lambda[i] * barrier_value_at(barriers_[i], F);
  }
  return v;
}

ScalarField2 ClbfAssembly::field() const {
  return ScalarField2(3, [self = *this](const Vector& x) { return self.evaluate(x); });
}

bool ClbfAssembly::in_unsafe(const Vector& x) const {
  return std::any_of(barriers_.begin(), barriers_.end(),
                     [&](const BarrierSpec& b) { return (x.head<2>() - b.center).squaredNorm() < b.l_D; });
}

ScalarField2 clbf_field(const ClbfAssembly& assembly) { return assembly.field(); }

UniversalTerms universal_terms(const ClbfAssembly& assembly, const AffineSdeSystem& sys, const InputBox& box,
                               const Vector& x) {
  const FieldSample w = assembly.evaluate(x);
  UniversalTerms t;
  t.generator = generator_parts(w, sys, x);
  t.decay = assembly.rho() * (w.value - assembly.origin_value());
  t.a = t.generator.drift_term + t.generator.input_gain.dot(box.mean()) + t.decay;
  t.b = t.generator.input_gain.cwiseProduct(box.half_range().transpose());
  return t;
}

Vector universal_formula(const UniversalTerms& t, const InputBox& box) {
  const double b2 = t.b.squaredNorm();
  if (b2 == 0.0) return box.mean();
  const double gain = (t.a + std::sqrt(t.a * t.a + b2 * b2)) / (b2 * (1 + std::sqrt(1 + b2)));
  return box.mean() - gain * box.half_range().cwiseProduct(t.b.transpose());
}

Vector universal_formula(const ClbfAssembly& assembly, const AffineSdeSystem& sys, const InputBox& box,
                         const Vector& x) {
  return universal_formula(universal_terms(assembly, sys, box, x), box);
}

Vector vertex_minimizer(const RowVector& input_gain, const InputBox& box) {
  Vector u(input_gain.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) u(j) = input_gain(j) <= 0 ? box.u_max(j) : box.u_min(j);
  return u;
}

RegionFlags region_membership(const ClbfAssembly& assembly, const AffineSdeSystem& sys, const InputBox& box,
                              const Vector& x) {
  RegionFlags flags;
  for (const auto& b : assembly.barriers()) {
    const double F = (x.head<2>() - b.center).squaredNorm();
    flags.in_X.push_back(F < b.l_X);
    flags.in_D = flags.in_D || F < b.l_D;
  }
  const UniversalTerms t = universal_terms(assembly, sys, box, x);
  flags.in_D_relaxed = t.decay / assembly.rho() + assembly.origin_value() > 0;
  // Both feasibility regions are classified on the admissible domain X \ D.
  // The goal itself is excluded from X_phi: there a = b = 0 and no input
  // can produce strict decrease.
  const bool at_goal = x.head<2>().isZero(0.0);
  flags.in_X_phi = !flags.in_D && !at_goal && t.a <= t.b.norm();
  flags.in_X_L = !flags.in_D && t.generator.at(vertex_minimizer(t.generator.input_gain, box)) < 0;
  return flags;
}

std::vector<double> GridSpec::uniform_thetas(int count) {
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(-M_PI + 2 * M_PI * k / count);
  return out;
}

RegionRaster region_grid_scan(const ClbfAssembly& assembly, const AffineSdeSystem& sys, const InputBox& box,
                              const GridSpec& grid) {
  if (grid.nx <= 0 || grid.ny <= 0 || grid.thetas.empty()) throw std::invalid_argument("region_grid_scan: empty grid");
  RegionRaster raster;
  raster.nx = grid.nx;
  raster.ny = grid.ny;
  raster.cells.resize(static_cast<std::size_t>(grid.nx) * grid.ny);

  auto scan_row = [&](int j) {
    for (int i = 0; i < grid.nx; ++i) {
      RasterCell cell;
      cell.x = grid.x_at(i);
      cell.y = grid.y_at(j);
      cell.in_X_phi = true;
      cell.in_X_L = true;
      for (double th : grid.thetas) {
        Vector x(3);
        x << cell.x, cell.y, th;
        const RegionFlags f = region_membership(assembly, sys, box, x);
        cell.in_D = f.in_D;
        cell.in_D_relaxed = cell.in_D_relaxed || f.in_D_relaxed;
        cell.in_X_phi = cell.in_X_phi && f.in_X_phi;
        cell.in_X_L = cell.in_X_L && f.in_X_L;
      }
      raster.cells[static_cast<std::size_t>(j) * grid.nx + i] = cell;
    }
  };

  const int workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int j = w; j < grid.ny; j += workers) scan_row(j);
    });
  }
  for (auto& t : pool) t.join();
  return raster;
}

void write_raster_csv(const RegionRaster& raster, std::ostream& out) {
  out << "# x,y,in_D,in_D_relaxed,in_X_phi,in_X_L\n";
  for (const auto& c : raster.cells) {
    out << c.x << ',' << c.y << ',' << c.in_D << ',' << c.in_D_relaxed << ',' << c.in_X_phi << ',' << c.in_X_L
        << '\n';
  }
}

}  // namespace clbf
