#include "clbf/sde_model.hpp"

#include <cmath>

namespace clbf {

AffineSdeSystem unicycle_system(const UnicycleParams& params) {
  if (!params.valid()) throw std::invalid_argument("unicycle_system: invalid noise parameters");

  AffineSdeSystem sys;
  sys.state_dim = 3;
  sys.input_dim = 2;
  sys.drift = [](const Vector&) { return Vector::Zero(3).eval(); };
  sys.input_matrix = [](const Vector& x) {
    Matrix g = Matrix::Zero(3, 2);
    g(0, 0) = std::cos(x(2));
    g(1, 0) = std::sin(x(2));
    g(2, 1) = 1.0;
    return g;
  };
  sys.diffusion = [params](const Vector& x) {
    const double r2 = x(0) * x(0) + x(1) * x(1);
    const double rg = params.goal_radius;
    const double scale = r2 <= rg * rg ? std::sqrt(r2) / rg : 1.0;
    Vector s(3);
    s << scale * params.sigma1, scale * params.sigma2, params.sigma3;
    return s;
  };
  return sys;
}

GeneratorParts generator_parts(const FieldSample& sample, const AffineSdeSystem& sys, const Vector& x) {
  const auto n = sys.state_dim;
  if (x.size() != n || sample.gradient.size() != n || sample.hessian.rows() != n || sample.hessian.cols() != n) {
    throw std::invalid_argument("generator: dimension mismatch");
  }
  const Vector sigma = sys.diffusion(x);
  GeneratorParts parts;
  parts.drift_term = sample.gradient.dot(sys.drift(x)) +
                     0.5 * (sigma.array().square() * sample.hessian.diagonal().array()).sum();
  parts.input_gain = sample.gradient * sys.input_matrix(x);
  return parts;
}

double generator(const FieldSample& sample, const AffineSdeSystem& sys, const Vector& x, const Vector& u) {
  if (u.size() != sys.input_dim) throw std::invalid_argument("generator: input dimension mismatch");
  return generator_parts(sample, sys, x).at(u);
}

double generator(const ScalarField2& field, const AffineSdeSystem& sys, const Vector& x, const Vector& u) {
  return generator(field.evaluate(x), sys, x, u);
}

Vector euler_maruyama_step(const AffineSdeSystem& sys, const Vector& x, const Vector& u, double dt,
                           const Vector& noise) {
  if (!(dt > 0)) throw std::invalid_argument("euler_maruyama_step: dt must be positive");
  if (x.size() != sys.state_dim || u.size() != sys.input_dim || noise.size() != sys.state_dim) {
    throw std::invalid_argument("euler_maruyama_step: dimension mismatch");
  }
  Vector next = x + sys.velocity(x, u) * dt + (sys.diffusion(x).array() * noise.array()).matrix() * std::sqrt(dt);
  if (!next.allFinite()) throw SimulationBlowUp("euler_maruyama_step: non-finite state");
  return next;
}

}  // namespace clbf
