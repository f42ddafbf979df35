#pragma once

#include "clbf/barrier.hpp"
#include "clbf/clf.hpp"
#include "clbf/sde_model.hpp"

#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace clbf {

/// Box u_min <= u <= u_max, equivalently u = u_mean + diag(u_half) K with
/// K in [-1, 1]^m.
struct InputBox {
  Vector u_min;
  Vector u_max;

  bool valid() const { return u_min.size() == u_max.size() && (u_min.array() < u_max.array()).all(); }
  Vector mean() const { return 0.5 * (u_max + u_min); }
  Vector half_range() const { return 0.5 * (u_max - u_min); }
  bool contains(const Vector& u, double slack = 0.0) const {
    return (u.array() >= u_min.array() - slack).all() && (u.array() <= u_max.array() + slack).all();
  }
  Vector clamp(const Vector& u) const { return u.cwiseMax(u_min).cwiseMin(u_max); }
};

class ClbfAssemblyError : public std::runtime_error {
 public:
  ClbfAssemblyError(const std::string& what, int obstacle) : std::runtime_error(what), obstacle_(obstacle) {}
  /// Index of the obstacle whose bound empties the kappa window.
  int obstacle() const { return obstacle_; }

 private:
  int obstacle_;
};

/// Weights combining the CLF and the barriers. c3/c4 are the extreme squared
/// position norms over the boundary of X_i and over D_i.
struct ClbfCoefficients {
  std::vector<double> lambda;
  double kappa{0};
  double kappa_lower{0};
  double kappa_upper{0};
  std::vector<double> eta;
  std::vector<double> c3;
  std::vector<double> c4;
};

/// lambda_i = (c2 c3_i - c1 c4_i) / eta_i + K_lambda_i and kappa at the
/// midpoint of its admissible window. Throws ClbfAssemblyError if the window
/// is empty.
ClbfCoefficients compute_coefficients(const ClfParams& clf, const std::vector<BarrierSpec>& barriers, double c1,
                                      double c2, const std::vector<double>& k_lambda);

struct ClbfOptions {
  double c1{8.5};
  double c2{10.0};
  std::vector<double> k_lambda;
  double rho{0.005};
};

/// W_c = V + sum_i lambda_i B_i + kappa, immutable once built.
class ClbfAssembly {
 public:
  ClbfAssembly(const ClfParams& clf, std::vector<BarrierSpec> barriers, const ClbfOptions& options);

  const ClfParams& clf_params() const { return clf_params_; }
  const ScalarField2& clf() const { return clf_; }
  const std::vector<BarrierSpec>& barriers() const { return barriers_; }
  const ClbfCoefficients& coefficients() const { return coeffs_; }
  const std::vector<double>& lambda() const { return coeffs_.lambda; }
  double kappa() const { return coeffs_.kappa; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }
  double rho() const { return rho_; }
  /// W_c at the origin, its minimum.
  double origin_value() const { return origin_value_; }

  FieldSample evaluate(const Vector& x) const;
  double value(const Vector& x) const;
  ScalarField2 field() const;

  bool in_unsafe(const Vector& x) const;

 private:
  ClfParams clf_params_;
  ScalarField2 clf_;
  std::vector<BarrierSpec> barriers_;
  ClbfCoefficients coeffs_;
  double c1_, c2_, rho_;
  double origin_value_{0};
};

ScalarField2 clbf_field(const ClbfAssembly& assembly);

/// The (a, b) pair of the box-constrained universal formula:
/// a = L_f W + 1/2 tr(sigma^T H sigma) + L_g W u_mean + rho (W - W(0)),
/// b = L_g W diag(u_half).
struct UniversalTerms {
  double a{0};
  RowVector b;
  double decay{0};  ///< rho (W - W(0))
  GeneratorParts generator;
};

UniversalTerms universal_terms(const ClbfAssembly& assembly, const AffineSdeSystem& sys, const InputBox& box,
                               const Vector& x);

/// Bounded feedback that keeps the input in the box and makes the generator
/// of W_c negative wherever a <= |b|.
Vector universal_formula(const ClbfAssembly& assembly, const AffineSdeSystem& sys, const InputBox& box,
                         const Vector& x);
Vector universal_formula(const UniversalTerms& terms, const InputBox& box);

/// Box vertex minimising the input-dependent generator term at x.
Vector vertex_minimizer(const RowVector& input_gain, const InputBox& box);

struct RegionFlags {
  bool in_D{false};
  bool in_D_relaxed{false};
  std::vector<bool> in_X;
  bool in_X_phi{false};
  bool in_X_L{false};
};

RegionFlags region_membership(const ClbfAssembly& assembly, const AffineSdeSystem& sys, const InputBox& box,
                              const Vector& x);

/// Cell-centred (x, y) raster; each cell is evaluated at every heading in
/// `thetas`.
struct GridSpec {
  double x_min{-10}, x_max{110};
  int nx{240};
  double y_min{-10}, y_max{90};
  int ny{200};
  std::vector<double> thetas{uniform_thetas(8)};

  static std::vector<double> uniform_thetas(int count);
  double x_at(int i) const { return x_min + (i + 0.5) * (x_max - x_min) / nx; }
  double y_at(int j) const { return y_min + (j + 0.5) * (y_max - y_min) / ny; }
};

/// in_X_phi / in_X_L are set only when every heading sample qualifies;
/// in_D_relaxed when any heading sample has W_c > 0.
struct RasterCell {
  double x{0}, y{0};
  bool in_D{false};
  bool in_D_relaxed{false};
  bool in_X_phi{false};
  bool in_X_L{false};
};

struct RegionRaster {
  int nx{0}, ny{0};
  std::vector<RasterCell> cells;  ///< row-major, rows along y

  const RasterCell& at(int i, int j) const { return cells[static_cast<std::size_t>(j) * nx + i]; }
};

RegionRaster region_grid_scan(const ClbfAssembly& assembly, const AffineSdeSystem& sys, const InputBox& box,
                              const GridSpec& grid);

void write_raster_csv(const RegionRaster& raster, std::ostream& out);

}  // namespace clbf
