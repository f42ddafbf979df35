// Command-line driver: closed-loop runs, Monte Carlo batches, region rasters,
// barrier profiles and parameter validation for a scenario file.

#include "clbf/scenario.hpp"
#include "clbf/sim.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kBlowUp = 2;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

clbf::ScenarioConfig load(const Common& c) {
  clbf::ScenarioConfig cfg = c.config_path.empty() ? clbf::table1_scenario() : clbf::load_scenario(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

// Writes to --out, or stdout when it is empty or "-".
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write(out);
}

bool report_problems(const clbf::ScenarioConfig& cfg) {
  const auto problems = clbf::validate_scenario(cfg);
  for (const auto& p : problems) std::cerr << "invalid: " << p << "\n";
  return problems.empty();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic MPC with control Lyapunov-barrier functions for a noisy unicycle"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "YAML scenario (default: built-in case study)");
    sub->add_option("--seed", common.seed, "Override the scenario seed");
    sub->add_option("--out", common.out, "Output file (default: stdout)");
  };

  std::string format = "csv";
  const std::map<std::string, clbf::TraceFormat> formats{{"csv", clbf::TraceFormat::kCsv},
                                                         {"json", clbf::TraceFormat::kJson}};

  auto* run = app.add_subcommand("run", "Simulate one closed-loop trace");
  add_common(run);
  run->add_option("--format", format, "Trace format")->check(CLI::IsMember({"csv", "json"}));

  int runs = 0;
  unsigned threads = 0;
  auto* mc = app.add_subcommand("mc", "Monte Carlo batch; writes a JSON summary");
  add_common(mc);
  mc->add_option("--runs", runs, "Number of runs (default: scenario value)")->check(CLI::PositiveNumber);
  mc->add_option("--threads", threads, "Worker threads (0 = all cores)");

  int nx = 240, ny = 200, n_theta = 8;
  auto* regions = app.add_subcommand("regions", "Raster of D, D_relaxed, X_phi and X_L over the plane");
  add_common(regions);
  regions->add_option("--nx", nx)->check(CLI::PositiveNumber);
  regions->add_option("--ny", ny)->check(CLI::PositiveNumber);
  regions->add_option("--thetas", n_theta, "Heading samples per cell")->check(CLI::PositiveNumber);

  int obstacle = 0, samples = 401;
  auto* profile = app.add_subcommand("barrier-profile", "B(F) for small, large and scheduled decay rates");
  add_common(profile);
  profile->add_option("--obstacle", obstacle, "Obstacle index")->check(CLI::NonNegativeNumber);
  profile->add_option("--samples", samples)->check(CLI::Range(2, 1000000));

  auto* validate = app.add_subcommand("validate", "Report every violated parameter inequality");
  add_common(validate);

  CLI11_PARSE(app, argc, argv);

  try {
    clbf::ScenarioConfig cfg = load(common);

    if (validate->parsed()) {
      const auto problems = clbf::validate_scenario(cfg);
      emit(common.out, [&](std::ostream& out) {
        if (problems.empty()) out << "ok: " << cfg.name << " satisfies every parameter condition\n";
        for (const auto& p : problems) out << "invalid: " << p << "\n";
      });
      return problems.empty() ? kOk : kInvalid;
    }
    if (!report_problems(cfg)) return kInvalid;

    if (run->parsed()) {
      const clbf::Trace trace = clbf::run_scenario(cfg);
      emit(common.out, [&](std::ostream& out) {
        if (formats.at(format) == clbf::TraceFormat::kCsv) {
          clbf::write_trace_csv(trace, out);
        } else {
          clbf::write_trace_json(trace, cfg, out);
        }
      });
      const auto& s = trace.summary;
      std::cerr << "final |p| = " << s.final_position_norm << ", collisions = " << s.collision_events
                << ", infeasible steps = " << s.infeasible_steps << ", fallback steps = " << s.fallback_steps << "\n";
      if (s.blew_up) {
        std::cerr << "simulation blow-up: " << s.error << "\n";
        return kBlowUp;
      }
      return kOk;
    }

    if (mc->parsed()) {
      if (runs > 0) cfg.runs = runs;
      const clbf::MonteCarloSummary summary = clbf::monte_carlo(cfg, threads);
      emit(common.out, [&](std::ostream& out) { clbf::write_monte_carlo_json(summary, cfg, out); });
      std::cerr << "runs = " << summary.runs.size() << ", converged = " << summary.converged
                << ", runs with collision = " << summary.runs_with_collision << ", blow-ups = " << summary.blowups
                << "\n";
      return summary.blowups > 0 ? kBlowUp : kOk;
    }

    const clbf::AffineSdeSystem sys = clbf::unicycle_system(cfg.unicycle);
    if (regions->parsed()) {
      const clbf::ClbfAssembly assembly(cfg.clf, cfg.barriers, cfg.clbf);
      clbf::GridSpec grid;
      grid.nx = nx;
      grid.ny = ny;
      grid.thetas = clbf::GridSpec::uniform_thetas(n_theta);
      const clbf::RegionRaster raster = clbf::region_grid_scan(assembly, sys, cfg.mpc.box, grid);
      emit(common.out, [&](std::ostream& out) { clbf::write_raster_csv(raster, out); });
      return kOk;
    }

    if (profile->parsed()) {
      if (obstacle >= static_cast<int>(cfg.barriers.size())) {
        std::cerr << "invalid: obstacle index out of range\n";
        return kInvalid;
      }
      const auto p = clbf::barrier_profile(cfg.barriers[static_cast<std::size_t>(obstacle)], samples);
      emit(common.out, [&](std::ostream& out) { clbf::write_barrier_profile_csv(p, out); });
      return kOk;
    }
  } catch (const clbf::ConfigError& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
  return kOk;
}
