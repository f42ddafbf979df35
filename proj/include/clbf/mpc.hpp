#pragma once

#include "clbf/clbf.hpp"
#include "clbf/sde_model.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace clbf {

struct SolverOptions {
  int max_iter{30};       ///< SQP iterations per start; 0 disables the solver
  double tol{1e-6};       ///< accepted constraint violation (generator units)
  int restarts{0};        ///< extra random starts beyond warm start and witness
  std::uint64_t seed{0};  ///< seeds the random starts
  double input_regularization{1e-6};  ///< tie-break weight on |u|^2
};

/// Receding-horizon problem: min sum_{i=1..N} x_i'Q x_i + sum_{i=0..N-1} u_i'R u_i
/// over box-constrained inputs, subject to L W_c(x_i, u_i) <= -eps_dec at
/// every knot outside D and away from the origin, and (unless `clearance` is
/// negative) |p_i - c_j| >= sqrt(l_D,j) + clearance for every predicted knot
/// i >= 1 and obstacle j.
struct MpcConfig {
  int horizon{20};
  double period{0.1};
  Matrix Q{Matrix::Identity(3, 3) * 10.0};
  Matrix R{Matrix::Zero(2, 2)};
  InputBox box;
  double eps_dec{1e-6};
  double clearance{0.5};
  SolverOptions solver;

  /// Empty when valid.
  std::vector<std::string> problems() const;
};

enum class OcpStatus { kOptimal, kFeasible, kInfeasible, kFallback };

std::string to_string(OcpStatus s);

struct OcpSolution {
  std::vector<Vector> inputs;            ///< empty when infeasible
  std::vector<Vector> predicted_states;  ///< N + 1 states for the returned inputs
  OcpStatus status{OcpStatus::kInfeasible};
  double cost{0};
  double max_violation{0};  ///< max over enforced rows (decrease and clearance)
  int iterations{0};
  int skipped_unsafe_knots{0};  ///< predicted knots inside D (constraint skipped)
  std::vector<Vector> least_infeasible;  ///< best-effort inputs when infeasible
};

class PredictionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One classical RK4 step of the nominal (noise-free) dynamics with the input held.
Vector rk4_step(const AffineSdeSystem& sys, const Vector& x, const Vector& u, double T);

/// Nominal prediction x_0 .. x_N under zero-order-hold inputs.
std::vector<Vector> predict(const AffineSdeSystem& sys, const Vector& state, const std::vector<Vector>& inputs,
                            double T);

double ocp_cost(const MpcConfig& config, const std::vector<Vector>& states, const std::vector<Vector>& inputs);

/// Single-shooting SQP over the input sequence with multiple starts:
/// the warm start (if any), the universal-formula rollout and `restarts`
/// random sequences. Returns the best feasible point seen.
OcpSolution solve_ocp(const AffineSdeSystem& sys, const ClbfAssembly& assembly, const MpcConfig& config,
                      const Vector& state, const std::vector<Vector>* warm_start = nullptr);

struct ControlResult {
  Vector input;
  OcpStatus status{OcpStatus::kInfeasible};
  OcpSolution solution;
};

/// First input of the OCP when it is feasible, otherwise the universal
/// formula inside X_phi, otherwise the least infeasible input.
ControlResult control_step(const AffineSdeSystem& sys, const ClbfAssembly& assembly, const MpcConfig& config,
                           const Vector& state, const std::vector<Vector>* warm_start = nullptr);

/// Closed-loop driver that keeps the shifted previous solution as warm start.
class RecedingHorizonController {
 public:
  RecedingHorizonController(const AffineSdeSystem& sys, const ClbfAssembly& assembly, MpcConfig config)
      : sys_(sys), assembly_(assembly), config_(std::move(config)) {}

  ControlResult step(const Vector& state);
  void reset() { warm_.clear(); }

 private:
  const AffineSdeSystem& sys_;
  const ClbfAssembly& assembly_;
  MpcConfig config_;
  std::vector<Vector> warm_;
};

}  // namespace clbf
