#include "clbf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace clbf {

namespace {

// Inequality rows are a'x + s = b with s >= 0. General rows come from G;
// bound rows are +-e_j and only touch the diagonal of the normal matrix.
struct Rows {
  const Matrix& G;
  std::vector<Eigen::Index> col;
  std::vector<double> sign;
  Vector b;
  Eigen::Index m_general;

  Eigen::Index size() const { return b.size(); }

  Vector apply(const Vector& x) const {
    Vector out(size());
    out.head(m_general) = G * x;
    for (std::size_t k = 0; k < col.size(); ++k) out(m_general + k) = sign[k] * x(col[k]);
    return out;
  }
  Vector apply_transpose(const Vector& y) const {
    Vector out = G.transpose() * y.head(m_general);
    for (std::size_t k = 0; k < col.size(); ++k) out(col[k]) += sign[k] * y(m_general + k);
    return out;
  }
};

double step_to_boundary(const Vector& v, const Vector& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

}  // namespace

QpResult solve_qp(const QpProblem& p, const QpOptions& options) {
  const Eigen::Index n = p.q.size();
  if (p.H.rows() != n || p.H.cols() != n || p.G.cols() != n || p.G.rows() != p.h.size() || p.lower.size() != n ||
      p.upper.size() != n) {
    throw std::invalid_argument("solve_qp: dimension mismatch");
  }

  Rows rows{p.G, {}, {}, Vector(), p.G.rows()};
  std::vector<double> rhs(p.h.data(), p.h.data() + p.h.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isfinite(p.upper(j))) {
      rows.col.push_back(j);
      rows.sign.push_back(1.0);
      rhs.push_back(p.upper(j));
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isfinite(p.lower(j))) {
      rows.col.push_back(j);
      rows.sign.push_back(-1.0);
      rhs.push_back(-p.lower(j));
    }
  }
  rows.b = Eigen::Map<Vector>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  const Eigen::Index m = rows.size();

  Vector x = Vector::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const bool lo = std::isfinite(p.lower(j)), hi = std::isfinite(p.upper(j));
    if (lo && hi) x(j) = 0.5 * (p.lower(j) + p.upper(j));
    else if (lo) x(j) = std::max(0.0, p.lower(j) + 1.0);
    else if (hi) x(j) = std::min(0.0, p.upper(j) - 1.0);
  }
  // Bound rows start at their true gap (x sits mid-box); general rows get a
  // unit floor. Duals are balanced so every pair starts on the same s z = mu0.
  Vector s = rows.b - rows.apply(x);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double floor = i < rows.m_general ? 1.0 : 1e-8;
    s(i) = std::max(s(i), floor);
  }
  const double mu0 = m > 0 ? std::max(1e-8, s.mean()) : 0.0;
  Vector z = s.cwiseInverse() * mu0;

  QpResult result;
  const double scale_d = 1.0 + p.q.lpNorm<Eigen::Infinity>();
  const double scale_p = 1.0 + (m > 0 ? rows.b.lpNorm<Eigen::Infinity>() : 0.0);

  for (int it = 0; it < options.max_iter; ++it) {
    const Vector r_d = p.H * x + p.q + rows.apply_transpose(z);
    const Vector r_p = rows.apply(x) + s - rows.b;
    const double mu = m > 0 ? s.dot(z) / m : 0.0;
    result.iterations = it;
    if (r_d.lpNorm<Eigen::Infinity>() <= options.tol * scale_d &&
        (m == 0 || r_p.lpNorm<Eigen::Infinity>() <= options.tol * scale_p) && mu <= options.tol) {
      result.converged = true;
      break;
    }

    const Vector d = z.cwiseQuotient(s);
    Matrix K = p.H;
    K.diagonal().array() += options.regularization;
    if (rows.m_general > 0) K.noalias() += p.G.transpose() * d.head(rows.m_general).asDiagonal() * p.G;
    for (std::size_t k = 0; k < rows.col.size(); ++k) K(rows.col[k], rows.col[k]) += d(rows.m_general + k);
    Eigen::LLT<Matrix> llt(K);
    if (llt.info() != Eigen::Success) {
      K.diagonal().array() += 1e-8 * (1.0 + K.diagonal().cwiseAbs().maxCoeff());
      llt.compute(K);
    }

    auto newton = [&](const Vector& r_c, Vector& dx, Vector& ds, Vector& dz) {
      const Vector w = (r_c - z.cwiseProduct(r_p)).cwiseQuotient(s);
      dx = llt.solve(-r_d + rows.apply_transpose(w));
      ds = -r_p - rows.apply(dx);
      dz = (-r_c - z.cwiseProduct(ds)).cwiseQuotient(s);
    };

    Vector dx, ds, dz;
    newton(s.cwiseProduct(z), dx, ds, dz);
    const double a_aff = std::min(step_to_boundary(s, ds), step_to_boundary(z, dz));
    const double mu_aff = m > 0 ? (s + a_aff * ds).dot(z + a_aff * dz) / m : 0.0;
    const double sigma = mu > 0 ? std::min(1.0, std::pow(mu_aff / mu, 3)) : 0.0;

    const Vector r_c = s.cwiseProduct(z) + ds.cwiseProduct(dz) - Vector::Constant(m, sigma * mu);
    newton(r_c, dx, ds, dz);
    const double alpha = std::min(1.0, 0.995 * std::min(step_to_boundary(s, ds), step_to_boundary(z, dz)));
    x += alpha * dx;
    s += alpha * ds;
    z += alpha * dz;
    result.iterations = it + 1;
  }

  result.x = x;
  result.z = z.head(rows.m_general);
  result.z_lower = Vector::Zero(n);
  result.z_upper = Vector::Zero(n);
  for (std::size_t k = 0; k < rows.col.size(); ++k) {
    (rows.sign[k] > 0 ? result.z_upper : result.z_lower)(rows.col[k]) = z(rows.m_general + k);
  }
  return result;
}

}  // namespace clbf
