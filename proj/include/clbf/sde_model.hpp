#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>

namespace clbf {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

/// Value, gradient (row) and Hessian of a scalar field at one state.
template <typename Scalar>
struct FieldSampleT {
  Scalar value{0};
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> gradient;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> hessian;

  static FieldSampleT zero(Eigen::Index dim) {
    FieldSampleT s;
    s.gradient.setZero(dim);
    s.hessian.setZero(dim, dim);
    return s;
  }

  FieldSampleT& operator+=(const FieldSampleT& other) {
    value += other.value;
    gradient += other.gradient;
    hessian += other.hessian;
    return *this;
  }
};

using FieldSample = FieldSampleT<double>;

inline FieldSample operator*(double weight, FieldSample s) {
  s.value *= weight;
  s.gradient *= weight;
  s.hessian *= weight;
  return s;
}

/// A twice differentiable scalar function of state. All three evaluators
/// share one underlying routine so that callers needing the full second
/// order sample pay for it once.
class ScalarField2 {
 public:
  using Evaluator = std::function<FieldSample(const Vector&)>;

  ScalarField2() = default;
  ScalarField2(Eigen::Index dim, Evaluator eval) : dim_(dim), eval_(std::move(eval)) {}

  Eigen::Index dim() const { return dim_; }

  FieldSample evaluate(const Vector& x) const {
    if (x.size() != dim_) throw std::invalid_argument("ScalarField2: state dimension mismatch");
    return eval_(x);
  }
  double value(const Vector& x) const { return evaluate(x).value; }
  RowVector gradient(const Vector& x) const { return evaluate(x).gradient; }
  Matrix hessian(const Vector& x) const { return evaluate(x).hessian; }

 private:
  Eigen::Index dim_{0};
  Evaluator eval_;
};

/// dx = (f(x) + g(x) u) dt + diag(sigma(x)) dW
///
/// `diffusion` returns the diagonal of sigma(x); only diagonal diffusion is
/// modelled.
struct AffineSdeSystem {
  Eigen::Index state_dim{0};
  Eigen::Index input_dim{0};
  std::function<Vector(const Vector&)> drift;
  std::function<Matrix(const Vector&)> input_matrix;
  std::function<Vector(const Vector&)> diffusion;

  Vector velocity(const Vector& x, const Vector& u) const { return drift(x) + input_matrix(x) * u; }
};

/// Noise intensities and goal radius of the stochastic unicycle.
struct UnicycleParams {
  double sigma1{0.3};
  double sigma2{0.3};
  double sigma3{0.6};
  double goal_radius{5.0};

  bool valid() const { return sigma1 >= 0 && sigma2 >= 0 && sigma3 >= 0 && goal_radius > 0; }
};

/// State (x, y, theta), input (v, omega). Position noise is scaled by
/// |(x, y)| / r_g inside the goal disc so that it vanishes at the origin.
AffineSdeSystem unicycle_system(const UnicycleParams& params);

/// Drift-side and input-side pieces of the generator, which is affine in u:
/// L W(x, u) = drift_term + input_gain * u.
struct GeneratorParts {
  double drift_term{0};  ///< L_f W + 1/2 tr(sigma^T H sigma)
  RowVector input_gain;  ///< L_g W

  double at(const Vector& u) const { return drift_term + input_gain.dot(u); }
};

GeneratorParts generator_parts(const FieldSample& sample, const AffineSdeSystem& sys, const Vector& x);

/// Ito infinitesimal generator of a field along the controlled SDE.
double generator(const FieldSample& sample, const AffineSdeSystem& sys, const Vector& x, const Vector& u);
double generator(const ScalarField2& field, const AffineSdeSystem& sys, const Vector& x, const Vector& u);

/// Raised when an integration step leaves the finite doubles.
class SimulationBlowUp : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One Euler-Maruyama step with externally supplied standard normals.
/// Angles are left unwrapped.
Vector euler_maruyama_step(const AffineSdeSystem& sys, const Vector& x, const Vector& u, double dt,
                           const Vector& noise);

}  // namespace clbf
