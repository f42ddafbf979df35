#pragma once

#include "clbf/barrier.hpp"
#include "clbf/clbf.hpp"
#include "clbf/clf.hpp"
#include "clbf/mpc.hpp"
#include "clbf/sde_model.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace clbf {

/// Everything needed to reproduce one closed-loop experiment.
struct ScenarioConfig {
  std::string name{"table1"};
  UnicycleParams unicycle;
  ClfParams clf;
  std::vector<BarrierSpec> barriers;
  ClbfOptions clbf;
  MpcConfig mpc;
  Vector initial_state{Vector::Zero(3)};
  double duration{60.0};  ///< simulated time
  int substeps{1};        ///< Euler-Maruyama steps per control period
  std::uint64_t seed{0};
  int runs{20};
  double goal_threshold{2.0};  ///< final position norm counted as converged
};

/// The reference case study: four circular obstacles, start (100, 80, -pi/2).
ScenarioConfig table1_scenario();

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a YAML scenario. Keys that are absent keep their case-study value.
ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario(const std::string& yaml_text);
std::string scenario_to_yaml(const ScenarioConfig& config);

/// Human-readable list of every violated invariant or parameter inequality;
/// empty means the scenario can be simulated.
std::vector<std::string> validate_scenario(const ScenarioConfig& config);

}  // namespace clbf
