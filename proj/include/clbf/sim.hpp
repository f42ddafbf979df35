#pragma once

#include "clbf/mpc.hpp"
#include "clbf/scenario.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace clbf {

/// One Euler-Maruyama substep. `input` and `status` are those of the control
/// step in effect at time t (the final record repeats the last one).
struct TraceRecord {
  double t{0};
  Vector state;
  Vector input;
  double W{0};
  OcpStatus status{OcpStatus::kOptimal};
  bool in_D{false};
  bool in_D_relaxed{false};
};

struct TraceSummary {
  double final_position_norm{0};
  std::vector<double> min_distance;  ///< per obstacle, to its centre
  int collision_events{0};           ///< entries into any D_i
  int infeasible_steps{0};
  int fallback_steps{0};
  int unsafe_predictions{0};  ///< control steps whose prediction touched D
  bool blew_up{false};
  std::string error;

  bool collided() const { return collision_events > 0; }
};

struct Trace {
  std::vector<TraceRecord> records;
  TraceSummary summary;
};

/// Recomputes the terminal summary from the records alone.
TraceSummary summarize(const std::vector<TraceRecord>& records, const std::vector<BarrierSpec>& barriers);

/// Closed loop of the receding-horizon controller and the SDE. The run stops
/// early (summary.blew_up) when the state becomes non-finite.
Trace run_scenario(const ScenarioConfig& config);

struct RunStats {
  std::uint64_t seed{0};
  double final_position_norm{0};
  int collision_events{0};
  bool converged{false};
  bool blew_up{false};
  double min_clearance{0};  ///< min over records and obstacles of |p - c_i| - sqrt(l_D,i)
};

struct Histogram {
  std::vector<double> edges;  ///< counts[k] covers [edges[k], edges[k+1])
  std::vector<int> counts;
};

struct MonteCarloSummary {
  std::vector<RunStats> runs;
  int collision_events{0};
  int runs_with_collision{0};
  int converged{0};
  int blowups{0};
  Histogram min_clearance;

  double converged_fraction() const { return runs.empty() ? 0.0 : double(converged) / runs.size(); }
};

/// config.runs independent traces with seeds seed, seed + 1, ... executed on
/// up to `threads` workers (0 = hardware concurrency).
MonteCarloSummary monte_carlo(const ScenarioConfig& config, unsigned threads = 0);

enum class TraceFormat { kCsv, kJson };

/// CSV: '#'-prefixed header then one numeric row per record. Status codes are
/// 0 optimal, 1 feasible, 2 infeasible, 3 fallback.
void write_trace_csv(const Trace& trace, std::ostream& out);
/// JSON with the same record schema, the summary and the scenario echo.
void write_trace_json(const Trace& trace, const ScenarioConfig& config, std::ostream& out);
void export_trace(const Trace& trace, const ScenarioConfig& config, const std::string& path, TraceFormat format);
Trace import_trace_json(const std::string& path);

void write_monte_carlo_json(const MonteCarloSummary& summary, const ScenarioConfig& config, std::ostream& out);

/// B(F) on [0, l_X] for a constant small rate (kb_b), a constant large rate
/// (the schedule's value at F = 0) and the cosine schedule itself.
struct BarrierProfile {
  double k_small{0}, k_large{0};
  std::vector<double> F, small, large, cosine;
};

BarrierProfile barrier_profile(const BarrierSpec& spec, int samples = 401);
void write_barrier_profile_csv(const BarrierProfile& profile, std::ostream& out);

}  // namespace clbf
