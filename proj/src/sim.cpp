#include "clbf/sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

namespace clbf {

namespace {

using nlohmann::json;

int status_code(OcpStatus s) { return static_cast<int>(s); }

OcpStatus status_from_string(const std::string& s) {
  for (OcpStatus v : {OcpStatus::kOptimal, OcpStatus::kFeasible, OcpStatus::kInfeasible, OcpStatus::kFallback}) {
    if (to_string(v) == s) return v;
  }
  throw std::runtime_error("unknown status '" + s + "'");
}

TraceRecord make_record(const ClbfAssembly& assembly, double t, const Vector& x, const ControlResult& control) {
  TraceRecord r;
  r.t = t;
  r.state = x;
  r.input = control.input;
  r.status = control.status;
  r.W = assembly.value(x);
  r.in_D = assembly.in_unsafe(x);
  r.in_D_relaxed = r.W > 0;
  return r;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

json scenario_json(const ScenarioConfig& c) {
  json obstacles = json::array();
  for (const auto& b : c.barriers) {
    obstacles.push_back({{"center", {b.center.x(), b.center.y()}},
                         {"l_D", b.l_D},
                         {"l_X", b.l_X},
                         {"B_min", b.B_min},
                         {"B_max", b.B_max},
                         {"kb_a", b.kb_a},
                         {"kb_b", b.kb_b}});
  }
  auto rows = [](const Matrix& M) {
    json out = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) out.push_back(to_std(M.row(r).transpose()));
    return out;
  };
  return {{"name", c.name},
          {"unicycle",
           {{"sigma", {c.unicycle.sigma1, c.unicycle.sigma2, c.unicycle.sigma3}},
            {"goal_radius", c.unicycle.goal_radius}}},
          {"clf", {{"p1", c.clf.p1}, {"p2", c.clf.p2}, {"p3", c.clf.p3}}},
          {"obstacles", obstacles},
          {"clbf", {{"c1", c.clbf.c1}, {"c2", c.clbf.c2}, {"k_lambda", c.clbf.k_lambda}, {"rho", c.clbf.rho}}},
          {"mpc",
           {{"horizon", c.mpc.horizon},
            {"period", c.mpc.period},
            {"Q", rows(c.mpc.Q)},
            {"R", rows(c.mpc.R)},
            {"input_min", to_std(c.mpc.box.u_min)},
            {"input_max", to_std(c.mpc.box.u_max)},
            {"eps_dec", c.mpc.eps_dec},
            {"clearance", c.mpc.clearance},
            {"solver",
             {{"max_iter", c.mpc.solver.max_iter},
              {"tol", c.mpc.solver.tol},
              {"restarts", c.mpc.solver.restarts},
              {"seed", c.mpc.solver.seed},
              {"input_regularization", c.mpc.solver.input_regularization}}}}},
          {"simulation",
           {{"initial_state", to_std(c.initial_state)},
            {"duration", c.duration},
            {"substeps", c.substeps},
            {"seed", c.seed},
            {"runs", c.runs},
            {"goal_threshold", c.goal_threshold}}}};
}

json summary_json(const TraceSummary& s) {
  return {{"final_position_norm", s.final_position_norm},
          {"min_distance", s.min_distance},
          {"collision_events", s.collision_events},
          {"infeasible_steps", s.infeasible_steps},
          {"fallback_steps", s.fallback_steps},
          {"unsafe_predictions", s.unsafe_predictions},
          {"blew_up", s.blew_up},
          {"error", s.error}};
}

}  // namespace

TraceSummary summarize(const std::vector<TraceRecord>& records, const std::vector<BarrierSpec>& barriers) {
  TraceSummary s;
  s.min_distance.assign(barriers.size(), std::numeric_limits<double>::infinity());
  bool inside_before = false;
  for (const auto& r : records) {
    bool inside = false;
    for (std::size_t i = 0; i < barriers.size(); ++i) {
      const double F = obstacle_F(barriers[i], r.state).value;
      s.min_distance[i] = std::min(s.min_distance[i], std::sqrt(F));
      inside = inside || F < barriers[i].l_D;
    }
    if (inside && !inside_before) ++s.collision_events;
    inside_before = inside;
  }
  if (!records.empty()) s.final_position_norm = records.back().state.head<2>().norm();
  return s;
}

Trace run_scenario(const ScenarioConfig& config) {
  const auto problems = validate_scenario(config);
  if (!problems.empty()) throw ConfigError("invalid scenario: " + problems.front());

  const AffineSdeSystem sys = unicycle_system(config.unicycle);
  const ClbfAssembly assembly(config.clf, config.barriers, config.clbf);
  RecedingHorizonController controller(sys, assembly, config.mpc);

  const long periods = std::lround(config.duration / config.mpc.period);
  const double dt = config.mpc.period / config.substeps;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal;

  Trace trace;
  trace.records.reserve(static_cast<std::size_t>(periods * config.substeps + 1));
  int infeasible = 0, fallback = 0, unsafe = 0;
  Vector x = config.initial_state;
  std::string error;

  for (long k = 0; k < periods && error.empty(); ++k) {
    const ControlResult control = controller.step(x);
    infeasible += control.status == OcpStatus::kInfeasible;
    fallback += control.status == OcpStatus::kFallback;
    unsafe += control.solution.skipped_unsafe_knots > 0;
    if (trace.records.empty()) {
      trace.records.push_back(make_record(assembly, 0.0, x, control));
    } else {
      trace.records.back().input = control.input;
      trace.records.back().status = control.status;
    }
    for (int j = 0; j < config.substeps; ++j) {
      Vector noise(sys.state_dim);
      for (Eigen::Index d = 0; d < noise.size(); ++d) noise(d) = normal(rng);
      try {
        x = euler_maruyama_step(sys, x, control.input, dt, noise);
      } catch (const SimulationBlowUp& e) {
        error = e.what();
        break;
      }
      const double t = static_cast<double>(k * config.substeps + j + 1) * dt;
      trace.records.push_back(make_record(assembly, t, x, control));
    }
  }

  trace.summary = summarize(trace.records, config.barriers);
  trace.summary.infeasible_steps = infeasible;
  trace.summary.fallback_steps = fallback;
  trace.summary.unsafe_predictions = unsafe;
  trace.summary.blew_up = !error.empty();
  trace.summary.error = error;
  return trace;
}

MonteCarloSummary monte_carlo(const ScenarioConfig& config, unsigned threads) {
  if (config.runs < 1) throw ConfigError("monte_carlo: runs must be >= 1");
  MonteCarloSummary out;
  out.runs.resize(static_cast<std::size_t>(config.runs));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < config.runs; i = next++) {
      try {
        ScenarioConfig c = config;
        c.seed = config.seed + static_cast<std::uint64_t>(i);
        const Trace trace = run_scenario(c);
        RunStats& r = out.runs[static_cast<std::size_t>(i)];
        r.seed = c.seed;
        r.final_position_norm = trace.summary.final_position_norm;
        r.collision_events = trace.summary.collision_events;
        r.blew_up = trace.summary.blew_up;
        r.converged = !r.blew_up && r.final_position_norm <= config.goal_threshold;
        r.min_clearance = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < config.barriers.size(); ++j) {
          r.min_clearance = std::min(r.min_clearance, trace.summary.min_distance[j] - std::sqrt(config.barriers[j].l_D));
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(config.runs));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  // Fixed bins of width 0.5 on [-2, 8]; values outside land in the end bins.
  for (int k = 0; k <= 20; ++k) out.min_clearance.edges.push_back(-2.0 + 0.5 * k);
  out.min_clearance.counts.assign(20, 0);
  for (const auto& r : out.runs) {
    out.collision_events += r.collision_events;
    out.runs_with_collision += r.collision_events > 0;
    out.converged += r.converged;
    out.blowups += r.blew_up;
    const int bin = static_cast<int>(std::floor((r.min_clearance + 2.0) / 0.5));
    ++out.min_clearance.counts[static_cast<std::size_t>(std::clamp(bin, 0, 19))];
  }
  return out;
}

void write_trace_csv(const Trace& trace, std::ostream& out) {
  out << "# t,x,y,theta,v,omega,W_c,status,in_D,in_D_relaxed\n";
  char line[512];
  for (const auto& r : trace.records) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,%d\n", r.t, r.state(0),
                  r.state(1), r.state(2), r.input(0), r.input(1), r.W, status_code(r.status), int(r.in_D),
                  int(r.in_D_relaxed));
    out << line;
  }
}

void write_trace_json(const Trace& trace, const ScenarioConfig& config, std::ostream& out) {
  json records = json::array();
  for (const auto& r : trace.records) {
    records.push_back({{"t", r.t},
                       {"x", r.state(0)},
                       {"y", r.state(1)},
                       {"theta", r.state(2)},
                       {"v", r.input(0)},
                       {"omega", r.input(1)},
                       {"W_c", r.W},
                       {"status", to_string(r.status)},
                       {"in_D", r.in_D},
                       {"in_D_relaxed", r.in_D_relaxed}});
  }
  const json doc = {{"scenario", scenario_json(config)}, {"summary", summary_json(trace.summary)}, {"records", records}};
  out << doc.dump(1) << "\n";
}

void export_trace(const Trace& trace, const ScenarioConfig& config, const std::string& path, TraceFormat format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (format == TraceFormat::kCsv) {
    write_trace_csv(trace, out);
  } else {
    write_trace_json(trace, config, out);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Trace import_trace_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const json doc = json::parse(in);
  Trace trace;
  for (const auto& j : doc.at("records")) {
    TraceRecord r;
    r.t = j.at("t").get<double>();
    r.state = Eigen::Vector3d(j.at("x").get<double>(), j.at("y").get<double>(), j.at("theta").get<double>());
    r.input = Eigen::Vector2d(j.at("v").get<double>(), j.at("omega").get<double>());
    r.W = j.at("W_c").get<double>();
    r.status = status_from_string(j.at("status").get<std::string>());
    r.in_D = j.at("in_D").get<bool>();
    r.in_D_relaxed = j.at("in_D_relaxed").get<bool>();
    trace.records.push_back(std::move(r));
  }
  const auto& s = doc.at("summary");
  trace.summary.final_position_norm = s.at("final_position_norm").get<double>();
  trace.summary.min_distance = s.at("min_distance").get<std::vector<double>>();
  trace.summary.collision_events = s.at("collision_events").get<int>();
  trace.summary.infeasible_steps = s.at("infeasible_steps").get<int>();
  trace.summary.fallback_steps = s.at("fallback_steps").get<int>();
  trace.summary.unsafe_predictions = s.at("unsafe_predictions").get<int>();
  trace.summary.blew_up = s.at("blew_up").get<bool>();
  trace.summary.error = s.at("error").get<std::string>();
  return trace;
}

void write_monte_carlo_json(const MonteCarloSummary& summary, const ScenarioConfig& config, std::ostream& out) {
  json runs = json::array();
  for (const auto& r : summary.runs) {
    runs.push_back({{"seed", r.seed},
                    {"final_position_norm", r.final_position_norm},
                    {"collision_events", r.collision_events},
                    {"converged", r.converged},
                    {"blew_up", r.blew_up},
                    {"min_clearance", r.min_clearance}});
  }
  const json doc = {{"scenario", scenario_json(config)},
                    {"runs", runs},
                    {"collision_events", summary.collision_events},
                    {"runs_with_collision", summary.runs_with_collision},
                    {"converged", summary.converged},
                    {"converged_fraction", summary.converged_fraction()},
                    {"blowups", summary.blowups},
                    {"min_clearance_histogram",
                     {{"edges", summary.min_clearance.edges}, {"counts", summary.min_clearance.counts}}}};
  out << doc.dump(1) << "\n";
}

BarrierProfile barrier_profile(const BarrierSpec& spec, int samples) {
  if (samples < 2) throw std::invalid_argument("barrier_profile: need at least 2 samples");
  BarrierProfile p;
  p.k_small = spec.kb_b;
  p.k_large = 1.5 * spec.kb_a + spec.kb_b;
  for (int i = 0; i < samples; ++i) {
    const double F = spec.l_X * i / (samples - 1);
    p.F.push_back(F);
    p.small.push_back(barrier_value_for_rate(spec, F, p.k_small));
    p.large.push_back(barrier_value_for_rate(spec, F, p.k_large));
    p.cosine.push_back(barrier_value_at(spec, F));
  }
  return p;
}

void write_barrier_profile_csv(const BarrierProfile& p, std::ostream& out) {
  out << "# F,B_small,B_large,B_cosine\n";
  char line[256];
  for (std::size_t i = 0; i < p.F.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", p.F[i], p.small[i], p.large[i], p.cosine[i]);
    out << line;
  }
}

}  // namespace clbf
