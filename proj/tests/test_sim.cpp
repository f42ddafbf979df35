#include "test_support.hpp"

#include "clbf/sim.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace clbf;
using testing::state;

namespace {

// Noise-free, obstacle-free plant starting one unit from the goal.
ScenarioConfig quiet_open_field() {
  ScenarioConfig c = table1_scenario();
  c.unicycle.sigma1 = c.unicycle.sigma2 = c.unicycle.sigma3 = 0;
  c.barriers.clear();
  c.clbf.k_lambda.clear();
  c.initial_state = state(1, 0, 0);
  c.duration = 10;
  c.mpc.horizon = 10;
  return c;
}

ScenarioConfig short_case_study(double duration = 2.0) {
  ScenarioConfig c = table1_scenario();
  c.duration = duration;
  c.mpc.horizon = 10;
  c.seed = 3;
  return c;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("clbf_smpc_test_" + name)).string();
}

}  // namespace

TEST_CASE("deterministic convergence without noise or obstacles") {
  const Trace trace = run_scenario(quiet_open_field());
  REQUIRE_FALSE(trace.summary.blew_up);
  CHECK(trace.summary.final_position_norm < 0.1);
  CHECK(trace.summary.collision_events == 0);
  CHECK(trace.summary.min_distance.empty());
}

TEST_CASE("timestamps, inputs and the record count") {
  ScenarioConfig c = short_case_study(1.0);
  c.substeps = 3;
  const Trace trace = run_scenario(c);
  const std::size_t steps = 10 * 3;
  REQUIRE(trace.records.size() == steps + 1);
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    CHECK(trace.records[i].t - trace.records[i - 1].t == doctest::Approx(0.1 / 3).epsilon(1e-12));
    CHECK(trace.records[i].t > trace.records[i - 1].t);
  }
  for (const auto& r : trace.records) CHECK(c.mpc.box.contains(r.input, 1e-12));
  // The input is held across each control period.
  CHECK(trace.records[0].input == trace.records[1].input);
  CHECK(trace.records[1].input == trace.records[2].input);

  std::ostringstream csv;
  write_trace_csv(trace, csv);
  CHECK(line_count(csv.str()) == steps + 2);  // header plus one row per record
  CHECK(csv.str().rfind("# t,x,y,theta,v,omega,W_c,status,in_D,in_D_relaxed\n", 0) == 0);
}

TEST_CASE("seeded runs are bit-identical") {
  const ScenarioConfig c = short_case_study();
  const Trace a = run_scenario(c), b = run_scenario(c);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].state == b.records[i].state);
    CHECK(a.records[i].input == b.records[i].input);
  }
  ScenarioConfig other = c;
  other.seed = 4;
  CHECK(run_scenario(other).records.back().state != a.records.back().state);
}

TEST_CASE("summary is recomputed from the records") {
  const auto barriers = table1_scenario().barriers;
  std::vector<TraceRecord> records;
  // In, out, in again: two entries into obstacle 0; one into obstacle 2.
  for (const Vector& p : {state(40, 40, 0), state(30, 25, 0), state(30, 26, 0), state(40, 40, 0), state(31, 25, 0),
                          state(68, 30, 0), state(3, 4, 0)}) {
    TraceRecord r;
    r.state = p;
    r.input = Vector::Zero(2);
    records.push_back(r);
  }
  const TraceSummary s = summarize(records, barriers);
  CHECK(s.collision_events == 2);
  CHECK(s.collided());
  CHECK(s.final_position_norm == doctest::Approx(5));
  CHECK(s.min_distance[0] == 0.0);
  CHECK(s.min_distance[2] == 0.0);
  CHECK(s.min_distance[1] == doctest::Approx(std::hypot(10, 10)));

  const TraceSummary none = summarize({}, barriers);
  CHECK(none.collision_events == 0);
  CHECK(std::isinf(none.min_distance[0]));
}

TEST_CASE("collision flags agree with the obstacles") {
  const Trace trace = run_scenario(short_case_study());
  const TraceSummary again = summarize(trace.records, table1_scenario().barriers);
  CHECK(again.collision_events == trace.summary.collision_events);
  for (const auto& r : trace.records) {
    bool inside = false;
    for (const auto& b : table1_scenario().barriers) inside = inside || (r.state.head<2>() - b.center).squaredNorm() < b.l_D;
    CHECK(r.in_D == inside);
  }
}

TEST_CASE("trace export") {
  const ScenarioConfig c = short_case_study(0.5);
  const Trace trace = run_scenario(c);

  SUBCASE("empty trace has only the header") {
    std::ostringstream out;
    write_trace_csv(Trace{}, out);
    CHECK(out.str() == "# t,x,y,theta,v,omega,W_c,status,in_D,in_D_relaxed\n");
  }

  SUBCASE("JSON round trip is exact") {
    const std::string path = temp_path("trace.json");
    export_trace(trace, c, path, TraceFormat::kJson);
    const Trace back = import_trace_json(path);
    std::remove(path.c_str());
    REQUIRE(back.records.size() == trace.records.size());
    for (std::size_t i = 0; i < back.records.size(); ++i) {
      const auto &x = trace.records[i], &y = back.records[i];
      CHECK(x.t == y.t);
      CHECK(x.state == y.state);
      CHECK(x.input == y.input);
      CHECK(x.W == y.W);
      CHECK(x.status == y.status);
      CHECK(x.in_D == y.in_D);
      CHECK(x.in_D_relaxed == y.in_D_relaxed);
    }
    CHECK(back.summary.final_position_norm == trace.summary.final_position_norm);
    CHECK(back.summary.min_distance == trace.summary.min_distance);
  }

  SUBCASE("JSON echoes the scenario") {
    std::ostringstream out;
    write_trace_json(trace, c, out);
    const auto doc = nlohmann::json::parse(out.str());
    CHECK(doc.at("scenario").at("obstacles").size() == 4);
    CHECK(doc.at("records").size() == trace.records.size());
  }

  SUBCASE("CSV parses back to the same numbers") {
    std::ostringstream out;
    write_trace_csv(trace, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    std::size_t row = 0;
    while (std::getline(in, line)) {
      double t, x, y;
      REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &x, &y) == 3);
      CHECK(t == trace.records[row].t);
      CHECK(x == trace.records[row].state(0));
      CHECK(y == trace.records[row].state(1));
      ++row;
    }
    CHECK(row == trace.records.size());
  }

  CHECK_THROWS(export_trace(trace, c, "/nonexistent/dir/trace.csv", TraceFormat::kCsv));
}

TEST_CASE("invalid scenarios are refused before simulating") {
  ScenarioConfig c = short_case_study();
  c.substeps = 0;
  CHECK_THROWS_AS(run_scenario(c), ConfigError);
  c = short_case_study();
  c.runs = 0;
  CHECK_THROWS_AS(monte_carlo(c), ConfigError);
}

TEST_CASE("Monte Carlo of one run equals the single run") {
  ScenarioConfig c = short_case_study(1.0);
  c.runs = 1;
  const MonteCarloSummary mc = monte_carlo(c, 1);
  const Trace single = run_scenario(c);
  REQUIRE(mc.runs.size() == 1);
  CHECK(mc.runs[0].seed == c.seed);
  CHECK(mc.runs[0].final_position_norm == single.summary.final_position_norm);
  CHECK(mc.runs[0].collision_events == single.summary.collision_events);
  CHECK(mc.converged == int(single.summary.final_position_norm <= c.goal_threshold));
  int total = 0;
  for (int n : mc.min_clearance.counts) total += n;
  CHECK(total == 1);
  CHECK(mc.min_clearance.edges.size() == mc.min_clearance.counts.size() + 1);
}

TEST_CASE("Monte Carlo seeds and threading") {
  ScenarioConfig c = short_case_study(0.5);
  c.runs = 3;
  c.seed = 10;
  const MonteCarloSummary one = monte_carlo(c, 1), many = monte_carlo(c, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(one.runs[i].seed == 10 + i);
    CHECK(one.runs[i].final_position_norm == many.runs[i].final_position_norm);
  }
  std::ostringstream out;
  write_monte_carlo_json(one, c, out);
  const auto doc = nlohmann::json::parse(out.str());
  CHECK(doc.at("runs").size() == 3);
  CHECK(doc.at("min_clearance_histogram").at("counts").size() == 20);
}

TEST_CASE("terminal spread grows with the noise level") {
  // Short open-field runs that end far outside the goal disc, so the noise
  // acts at full strength throughout; common seeds across the noise levels.
  double previous = 0;
  for (double scale : {0.5, 1.0, 2.0}) {
    ScenarioConfig c = quiet_open_field();
    c.unicycle = UnicycleParams{};
    c.unicycle.sigma1 *= scale;
    c.unicycle.sigma2 *= scale;
    c.unicycle.sigma3 *= scale;
    c.initial_state = state(40, 0, M_PI);
    c.duration = 1;
    c.mpc.horizon = 3;
    c.runs = 20;
    c.seed = 100;
    REQUIRE(validate_scenario(c).empty());
    const MonteCarloSummary mc = monte_carlo(c);
    std::vector<Vector> finals;
    for (const auto& r : mc.runs) {
      ScenarioConfig one = c;
      one.seed = r.seed;
      finals.push_back(run_scenario(one).records.back().state.head<2>());
    }
    Vector mean = Vector::Zero(2);
    for (const auto& p : finals) mean += p / finals.size();
    double spread = 0;
    for (const auto& p : finals) spread += (p - mean).squaredNorm() / finals.size();
    CHECK(spread > previous);
    previous = spread;
  }
}

TEST_CASE("barrier profile lies between the constant-rate extremes") {
  const BarrierSpec b = table1_scenario().barriers.front();
  const BarrierProfile p = barrier_profile(b, 101);
  CHECK(p.k_small == doctest::Approx(0.1));
  CHECK(p.k_large == doctest::Approx(90.1));
  REQUIRE(p.F.size() == 101);
  CHECK(p.F.front() == 0.0);
  CHECK(p.F.back() == b.l_X);
  for (std::size_t i = 0; i < p.F.size(); ++i) {
    const double lo = std::min(p.small[i], p.large[i]), hi = std::max(p.small[i], p.large[i]);
    CHECK(p.cosine[i] >= lo - 1e-12);
    CHECK(p.cosine[i] <= hi + 1e-12);
  }
  std::ostringstream out;
  write_barrier_profile_csv(p, out);
  CHECK(line_count(out.str()) == 102);
  CHECK_THROWS_AS(barrier_profile(b, 1), std::invalid_argument);
}
