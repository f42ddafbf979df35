#include "clbf/mpc.hpp"

#include "clbf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace clbf {

std::vector<std::string> MpcConfig::problems() const {
  std::vector<std::string> out;
  if (horizon < 1) out.emplace_back("horizon must be >= 1");
  if (!(period > 0)) out.emplace_back("period must be positive");
  if (!(eps_dec > 0)) out.emplace_back("eps_dec must be positive");
  if (!box.valid()) out.emplace_back("input box must satisfy u_min < u_max");
  auto psd = [](const Matrix& M) {
    if (M.rows() != M.cols() || !M.isApprox(M.transpose(), 1e-12)) return false;
    return (Eigen::SelfAdjointEigenSolver<Matrix>(M).eigenvalues().array() >= -1e-12).all();
  };
  if (!psd(Q)) out.emplace_back("Q must be symmetric positive semidefinite");
  if (!psd(R)) out.emplace_back("R must be symmetric positive semidefinite");
  if (solver.max_iter < 0 || solver.restarts < 0) out.emplace_back("solver budget must be non-negative");
  return out;
}

std::string to_string(OcpStatus s) {
  switch (s) {
    case OcpStatus::kOptimal:
      return "optimal";
    case OcpStatus::kFeasible:
      return "feasible";
    case OcpStatus::kInfeasible:
      return "infeasible";
    case OcpStatus::kFallback:
      return "fallback";
  }
  return "unknown";
}

Vector rk4_step(const AffineSdeSystem& sys, const Vector& x, const Vector& u, double T) {
  const Vector k1 = sys.velocity(x, u);
  const Vector k2 = sys.velocity(x + 0.5 * T * k1, u);
  const Vector k3 = sys.velocity(x + 0.5 * T * k2, u);
  const Vector k4 = sys.velocity(x + T * k3, u);
  return x + (T / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
}

std::vector<Vector> predict(const AffineSdeSystem& sys, const Vector& state, const std::vector<Vector>& inputs,
                            double T) {
  std::vector<Vector> xs;
  xs.reserve(inputs.size() + 1);
  xs.push_back(state);
  for (const auto& u : inputs) {
    xs.push_back(rk4_step(sys, xs.back(), u, T));
    if (!xs.back().allFinite()) throw PredictionError("predict: non-finite state");
  }
  return xs;
}

double ocp_cost(const MpcConfig& config, const std::vector<Vector>& states, const std::vector<Vector>& inputs) {
  double J = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    J += states[i + 1].dot(config.Q * states[i + 1]) + inputs[i].dot(config.R * inputs[i]);
  }
  return J;
}

namespace {

constexpr double kPenalty = 100.0;
// Relative predicted merit decrease below which a point counts as stationary.
constexpr double kStationarity = 1e-12;

struct Candidate {
  Vector U;
  std::vector<Vector> states;
  double cost{0};         // ocp cost plus the tie-break term
  std::vector<double> c;  // decrease rows (one per knot), then clearance rows
  std::vector<bool> enforced;
  double max_violation{-std::numeric_limits<double>::infinity()};
  int skipped_unsafe{0};
  bool ok{false};
};

class ShootingProblem {
 public:
  ShootingProblem(const AffineSdeSystem& sys, const ClbfAssembly& assembly, const MpcConfig& config, Vector x0)
      : sys_(sys),
        W_(assembly),
        cfg_(config),
        x0_(std::move(x0)),
        m_(sys.input_dim),
        N_(config.horizon),
        nobs_(config.clearance >= 0 ? static_cast<int>(assembly.barriers().size()) : 0) {
    lower_ = config.box.u_min.replicate(N_, 1);
    upper_ = config.box.u_max.replicate(N_, 1);
    half_ = config.box.half_range().replicate(N_, 1);
  }

  Eigen::Index nvar() const { return m_ * N_; }
  int rows() const { return N_ + N_ * nobs_; }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  const Vector& half() const { return half_; }

  Vector input(const Vector& U, int i) const { return U.segment(i * m_, m_); }

  Vector stack(const std::vector<Vector>& inputs) const {
    Vector U(nvar());
    for (int i = 0; i < N_; ++i) U.segment(i * m_, m_) = inputs[std::min<std::size_t>(i, inputs.size() - 1)];
    return U.cwiseMax(lower_).cwiseMin(upper_);
  }
  std::vector<Vector> unstack(const Vector& U) const {
    std::vector<Vector> out;
    for (int i = 0; i < N_; ++i) out.push_back(input(U, i));
    return out;
  }

  bool excluded(const Vector& x) const { return W_.in_unsafe(x) || x.head<2>().norm() == 0.0; }

  double decrease(const Vector& x, const Vector& u) const {
    return generator_parts(W_.evaluate(x), sys_, x).at(u) + cfg_.eps_dec;
  }

  Candidate evaluate(const Vector& U) const {
    Candidate cand;
    cand.U = U;
    try {
      cand.states = predict(sys_, x0_, unstack(U), cfg_.period);
    } catch (const PredictionError&) {
      return cand;
    }
    cand.cost = ocp_cost(cfg_, cand.states, unstack(U)) + cfg_.solver.input_regularization * U.squaredNorm();
    cand.c.assign(rows(), 0.0);
    cand.enforced.assign(rows(), false);
    auto record = [&](int r, double value) {
      cand.enforced[r] = true;
      cand.c[r] = value;
      cand.max_violation = std::max(cand.max_violation, value);
    };
    for (int i = 0; i < N_; ++i) {
      const Vector& x = cand.states[i];
      if (excluded(x)) {
        if (W_.in_unsafe(x)) ++cand.skipped_unsafe;
      } else {
        record(i, decrease(x, input(U, i)));
      }
      for (int j = 0; j < nobs_; ++j) record(clearance_row(i + 1, j), clearance(cand.states[i + 1], j));
    }
    cand.ok = std::isfinite(cand.cost);
    return cand;
  }

  // Row of the clearance constraint of knot i >= 1 against obstacle j.
  int clearance_row(int i, int j) const { return N_ + (i - 1) * nobs_ + j; }

  double clearance(const Vector& x, int j) const {
    const BarrierSpec& b = W_.barriers()[j];
    const double r = std::sqrt(b.l_D) + cfg_.clearance;
    return r * r - obstacle_F(b, x).value;
  }

  struct Linearization {
    Vector cost_gradient;
    Matrix cost_hessian;
    Matrix constraint_jacobian;  // rows for every knot; zero rows when not enforced
  };

  Linearization linearize(const Candidate& cand) const {
    const Eigen::Index n = nvar(), nx = sys_.state_dim;
    Linearization lin;
    lin.cost_gradient = 2 * cfg_.solver.input_regularization * cand.U;
    lin.cost_hessian = 2 * cfg_.solver.input_regularization * Matrix::Identity(n, n);
    lin.constraint_jacobian = Matrix::Zero(rows(), n);

    Matrix S = Matrix::Zero(nx, n);  // d x_i / d U
    for (int i = 0; i < N_; ++i) {
      const Vector& x = cand.states[i];
      const Vector u = input(cand.U, i);

      if (cand.enforced[i]) {
        const FieldSample w = W_.evaluate(x);
        RowVector dx(nx);
        for (Eigen::Index j = 0; j < nx; ++j) {
          const double h = 1e-6 * (1 + std::abs(x(j)));
          Vector xp = x, xm = x;
          xp(j) += h;
          xm(j) -= h;
          dx(j) = (decrease(xp, u) - decrease(xm, u)) / (2 * h);
        }
        lin.constraint_jacobian.row(i) = dx * S;
        lin.constraint_jacobian.block(i, i * m_, 1, m_) += generator_parts(w, sys_, x).input_gain;
      }

      // Sensitivity of the RK4 map by central differences.
      Matrix A(nx, nx), B(nx, m_);
      for (Eigen::Index j = 0; j < nx; ++j) {
        const double h = 1e-6 * (1 + std::abs(x(j)));
        Vector xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        A.col(j) = (rk4_step(sys_, xp, u, cfg_.period) - rk4_step(sys_, xm, u, cfg_.period)) / (2 * h);
      }
      for (Eigen::Index j = 0; j < m_; ++j) {
        const double h = 1e-6 * (1 + std::abs(u(j)));
        Vector up = u, um = u;
        up(j) += h;
        um(j) -= h;
        B.col(j) = (rk4_step(sys_, x, up, cfg_.period) - rk4_step(sys_, x, um, cfg_.period)) / (2 * h);
      }
      Matrix next = A * S;
      next.block(0, i * m_, nx, m_) += B;
      S = std::move(next);

      const Vector& xn = cand.states[i + 1];
      for (int j = 0; j < nobs_; ++j) {
        lin.constraint_jacobian.row(clearance_row(i + 1, j)) = -obstacle_F(W_.barriers()[j], xn).gradient * S;
      }
      lin.cost_gradient += 2 * S.transpose() * (cfg_.Q * xn);
      lin.cost_hessian += 2 * S.transpose() * cfg_.Q * S;
      lin.cost_gradient.segment(i * m_, m_) += 2 * cfg_.R * u;
      lin.cost_hessian.block(i * m_, i * m_, m_, m_) += 2 * cfg_.R;
    }
    return lin;
  }

 private:
  const AffineSdeSystem& sys_;
  const ClbfAssembly& W_;
  const MpcConfig& cfg_;
  Vector x0_;
  Eigen::Index m_;
  int N_;
  int nobs_;
  Vector lower_, upper_, half_;
};

struct RunOutcome {
  bool converged{false};
  int iterations{0};
};

struct Tracker {
  double tol{0};
  bool have_feasible{false};
  Candidate best;
  bool best_converged{false};
  bool have_any{false};
  Candidate least;
  double least_violation{std::numeric_limits<double>::infinity()};

  void offer(const Candidate& c) {
    if (!c.ok) return;
    if (c.max_violation <= tol && (!have_feasible || c.cost < best.cost)) {
      best = c;
      have_feasible = true;
      best_converged = false;
    }
    double total = 0;
    for (std::size_t i = 0; i < c.c.size(); ++i) {
      if (c.enforced[i]) total += std::max(0.0, c.c[i]);
    }
    if (total < least_violation) {
      least_violation = total;
      least = c;
      have_any = true;
    }
  }
};

// Trust-region S-l1-QP on the merit  J/J0 + nu * sum_i s_i max(0, c_i).
RunOutcome run_sqp(const ShootingProblem& prob, const Vector& U0, int max_iter, Tracker& tracker) {
  RunOutcome out;
  if (max_iter <= 0) return out;

  Candidate cur = prob.evaluate(U0);
  tracker.offer(cur);
  if (!cur.ok) return out;

  const Eigen::Index n = prob.nvar();
  const int N = static_cast<int>(cur.c.size());
  const double cost_scale = std::max(1.0, cur.cost);
  std::vector<double> row_scale(N, 0.0);  // fixed on first use so the merit stays consistent

  auto merit = [&](const Candidate& c) {
    if (!c.ok) return std::numeric_limits<double>::infinity();
    double phi = c.cost / cost_scale;
    for (int i = 0; i < N; ++i) {
      if (c.enforced[i] && row_scale[i] > 0) phi += kPenalty * row_scale[i] * std::max(0.0, c.c[i]);
    }
    return phi;
  };

  double radius = 1.0;  // in units of the box half range
  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    const auto lin = prob.linearize(cur);
    std::vector<int> enforced;
    for (int i = 0; i < N; ++i) {
      if (!cur.enforced[i]) continue;
      if (row_scale[i] == 0) row_scale[i] = 1.0 / std::max(1.0, lin.constraint_jacobian.row(i).cwiseAbs().maxCoeff());
      enforced.push_back(i);
    }
    const double phi = merit(cur);

    bool accepted = false;
    while (!accepted) {
      const Vector lo = (prob.lower() - cur.U).cwiseMax(-radius * prob.half());
      const Vector hi = (prob.upper() - cur.U).cwiseMin(radius * prob.half());
      // Rows that stay satisfied everywhere in the trust region carry a zero
      // elastic variable; leaving them out keeps the QP small and well scaled.
      std::vector<int> rows;
      for (int i : enforced) {
        const auto g = lin.constraint_jacobian.row(i);
        const double reach = g.cwiseMax(0).dot(hi) + g.cwiseMin(0).dot(lo);
        if (cur.c[i] + reach >= 0) rows.push_back(i);
      }
      const Eigen::Index p = static_cast<Eigen::Index>(rows.size());

      QpProblem qp;
      qp.H = Matrix::Zero(n + p, n + p);
      qp.H.topLeftCorner(n, n) = lin.cost_hessian / cost_scale;
      qp.q = Vector::Zero(n + p);
      qp.q.head(n) = lin.cost_gradient / cost_scale;
      qp.q.tail(p).setConstant(kPenalty);
      qp.G = Matrix::Zero(p, n + p);
      qp.h = Vector::Zero(p);
      for (Eigen::Index r = 0; r < p; ++r) {
        const int i = rows[r];
        // Same half-space, normalized so the slack starts near unity.
        const double beta = 1.0 / std::max(1.0, row_scale[i] * std::abs(cur.c[i]));
        qp.G.row(r).head(n) = beta * row_scale[i] * lin.constraint_jacobian.row(i);
        qp.G(r, n + r) = -beta;
        qp.h(r) = -beta * row_scale[i] * cur.c[i];
      }
      qp.lower = Vector::Zero(n + p);
      qp.upper = Vector::Zero(n + p);
      qp.lower.head(n) = lo;
      qp.upper.head(n) = hi;
      // The optimal elastic value is max(0, g d - h), so the largest
      // violation over the trust box is a valid (inactive) upper bound.
      for (Eigen::Index r = 0; r < p; ++r) {
        const auto g = qp.G.row(r).head(n);
        const double worst = g.cwiseMax(0).dot(hi) + g.cwiseMin(0).dot(lo) - qp.h(r);
        qp.upper(n + r) = (std::max(0.0, worst) + 1.0) / -qp.G(r, n + r);
      }
      const QpResult sol = solve_qp(qp);
      const Vector d = sol.x.head(n);

      double model = cur.cost / cost_scale + qp.q.head(n).dot(d) + 0.5 * d.dot(qp.H.topLeftCorner(n, n) * d);
      for (int i : enforced) {
        model += kPenalty * row_scale[i] * std::max(0.0, cur.c[i] + lin.constraint_jacobian.row(i).dot(d));
      }
      const double predicted = phi - model;
      if (!(predicted > kStationarity * (1 + std::abs(phi)))) {
        // A small predicted decrease only certifies stationarity when the
        // trust region is not what limits the step.
        if (radius < 1.0) {
          radius = 1.0;
          continue;
        }
        out.converged = true;
        if (tracker.have_feasible && tracker.best.U == cur.U) tracker.best_converged = true;
        return out;
      }
      Candidate trial = prob.evaluate((cur.U + d).cwiseMax(prob.lower()).cwiseMin(prob.upper()));
      tracker.offer(trial);
      const double ratio = (phi - merit(trial)) / predicted;
      if (ratio > 0.1) {
        const bool at_edge = ((d.cwiseAbs() - radius * prob.half()).array() > -1e-9).any();
        if (ratio > 0.75 && at_edge) radius = std::min(2.0 * radius, 2.0);
        if (ratio < 0.25) radius *= 0.25;
        cur = std::move(trial);
        accepted = true;
      } else {
        radius *= 0.25;
        if (radius < 1e-7) {
          out.converged = true;
          if (tracker.have_feasible && tracker.best.U == cur.U) tracker.best_converged = true;
          return out;
        }
        if (++it >= max_iter) return out;
        out.iterations = it + 1;
      }
    }
  }
  return out;
}

std::vector<Vector> witness_inputs(const AffineSdeSystem& sys, const ClbfAssembly& assembly, const MpcConfig& config,
                                   const Vector& state) {
  std::vector<Vector> inputs;
  Vector x = state;
  for (int i = 0; i < config.horizon; ++i) {
    const Vector u = universal_formula(assembly, sys, config.box, x);
    inputs.push_back(u);
    x = rk4_step(sys, x, u, config.period);
    if (!x.allFinite()) break;
  }
  while (static_cast<int>(inputs.size()) < config.horizon) inputs.push_back(config.box.mean());
  return inputs;
}

}  // namespace

OcpSolution solve_ocp(const AffineSdeSystem& sys, const ClbfAssembly& assembly, const MpcConfig& config,
                      const Vector& state, const std::vector<Vector>* warm_start) {
  if (!state.allFinite()) throw std::invalid_argument("solve_ocp: non-finite state");
  const ShootingProblem prob(sys, assembly, config, state);

  Tracker tracker;
  tracker.tol = config.solver.tol;
  OcpSolution sol;
  const int budget = config.solver.max_iter;
  auto run = [&](const Vector& U0) { sol.iterations += run_sqp(prob, U0, budget, tracker).iterations; };

  // A warm start that is already feasible makes the witness run redundant;
  // the witness is then only scored. The decision does not depend on the
  // budget, so a larger budget only ever extends the same iterate sequences.
  const Vector witness = prob.stack(witness_inputs(sys, assembly, config, state));
  bool warm_feasible = false;
  if (warm_start && !warm_start->empty()) {
    const Vector U0 = prob.stack(*warm_start);
    const Candidate c = prob.evaluate(U0);
    warm_feasible = c.ok && c.max_violation <= config.solver.tol;
    run(U0);
  }
  if (!warm_feasible) {
    run(witness);
  } else if (budget > 0) {
    tracker.offer(prob.evaluate(witness));
  }

  std::mt19937_64 rng(config.solver.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int r = 0; r < config.solver.restarts; ++r) {
    Vector U(prob.nvar());
    for (Eigen::Index j = 0; j < U.size(); ++j) U(j) = unit(rng);
    run((prob.lower() + prob.upper()) / 2 + prob.half().cwiseProduct(U));
  }

  if (tracker.have_feasible) {
    const Candidate& best = tracker.best;
    sol.inputs = prob.unstack(best.U);
    sol.predicted_states = best.states;
    sol.cost = ocp_cost(config, best.states, sol.inputs);
    sol.max_violation = best.max_violation;
    sol.skipped_unsafe_knots = best.skipped_unsafe;
    sol.status = tracker.best_converged ? OcpStatus::kOptimal : OcpStatus::kFeasible;
  } else {
    sol.status = OcpStatus::kInfeasible;
    if (tracker.have_any) {
      sol.least_infeasible = prob.unstack(tracker.least.U);
      sol.predicted_states = tracker.least.states;
      sol.max_violation = tracker.least.max_violation;
      sol.cost = ocp_cost(config, tracker.least.states, sol.least_infeasible);
    }
  }
  return sol;
}

ControlResult control_step(const AffineSdeSystem& sys, const ClbfAssembly& assembly, const MpcConfig& config,
                           const Vector& state, const std::vector<Vector>* warm_start) {
  ControlResult out;
  out.solution = solve_ocp(sys, assembly, config, state, warm_start);
  out.status = out.solution.status;
  if (out.status == OcpStatus::kOptimal || out.status == OcpStatus::kFeasible) {
    out.input = out.solution.inputs.front();
    return out;
  }
  const UniversalTerms terms = universal_terms(assembly, sys, config.box, state);
  if (region_membership(assembly, sys, config.box, state).in_X_phi) {
    out.input = universal_formula(terms, config.box);
    out.status = OcpStatus::kFallback;
    return out;
  }
  out.input = out.solution.least_infeasible.empty() ? vertex_minimizer(terms.generator.input_gain, config.box)
                                                    : out.solution.least_infeasible.front();
  return out;
}

ControlResult RecedingHorizonController::step(const Vector& state) {
  ControlResult r = control_step(sys_, assembly_, config_, state, warm_.empty() ? nullptr : &warm_);
  const auto& seq = r.solution.inputs.empty() ? r.solution.least_infeasible : r.solution.inputs;
  warm_.clear();
  if (!seq.empty()) {
    warm_.assign(seq.begin() + 1, seq.end());
    warm_.push_back(seq.back());
  }
  return r;
}

}  // namespace clbf
