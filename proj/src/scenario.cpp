#include "clbf/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace clbf {

ScenarioConfig table1_scenario() {
  ScenarioConfig c;
  const double obstacles[4][4] = {{30, 25, 25, 36}, {50, 50, 25, 36}, {68, 30, 56.25, 90.25}, {80, 60, 56.25, 90.25}};
  for (const auto& o : obstacles) {
    BarrierSpec b;
    b.center = {o[0], o[1]};
    b.l_D = o[2];
    b.l_X = o[3];
    c.barriers.push_back(b);
  }
  c.clbf.k_lambda = {1e5, 8e4, 1e5, 8e4};
  c.mpc.box.u_min = Eigen::Vector2d(-10, -M_PI / 2);
  c.mpc.box.u_max = Eigen::Vector2d(10, M_PI / 2);
  c.initial_state = Eigen::Vector3d(100, 80, -M_PI / 2);
  return c;
}

namespace {

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!keys.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  if (!node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(where + "." + key + ": " + e.msg);
  }
}

Vector read_vector(const YAML::Node& node, const std::string& where) {
  if (!node.IsSequence()) throw ConfigError(where + ": expected a list of numbers");
  Vector v(static_cast<Eigen::Index>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i) {
    try {
      v(static_cast<Eigen::Index>(i)) = node[i].as<double>();
    } catch (const YAML::Exception& e) {
      throw ConfigError(where + ": " + e.msg);
    }
  }
  return v;
}

// Either a list of diagonal entries or a list of rows.
Matrix read_matrix(const YAML::Node& node, const std::string& where) {
  if (!node.IsSequence() || node.size() == 0) throw ConfigError(where + ": expected a non-empty list");
  if (!node[0].IsSequence()) return read_vector(node, where).asDiagonal();
  const auto n = static_cast<Eigen::Index>(node.size());
  Matrix M(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Vector row = read_vector(node[r], where);
    if (row.size() != n) throw ConfigError(where + ": matrix must be square");
    M.row(r) = row.transpose();
  }
  return M;
}

YAML::Node vector_node(const Vector& v) {
  YAML::Node n(YAML::NodeType::Sequence);
  for (Eigen::Index i = 0; i < v.size(); ++i) n.push_back(v(i));
  n.SetStyle(YAML::EmitterStyle::Flow);
  return n;
}

YAML::Node matrix_node(const Matrix& M) {
  const Matrix D = M.diagonal().asDiagonal();
  if (M.rows() == M.cols() && M == D) return vector_node(M.diagonal());
  YAML::Node n(YAML::NodeType::Sequence);
  for (Eigen::Index r = 0; r < M.rows(); ++r) n.push_back(vector_node(M.row(r).transpose()));
  return n;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("yaml: ") + e.what());
  }
  ScenarioConfig c = table1_scenario();
  if (root.IsNull()) return c;
  check_keys(root, "scenario", {"name", "unicycle", "clf", "obstacles", "clbf", "mpc", "simulation"});
  read(root, "name", c.name, "scenario");

  if (const auto u = root["unicycle"]) {
    check_keys(u, "unicycle", {"sigma", "goal_radius"});
    if (u["sigma"]) {
      const Vector s = read_vector(u["sigma"], "unicycle.sigma");
      if (s.size() != 3) throw ConfigError("unicycle.sigma: expected 3 entries");
      c.unicycle.sigma1 = s(0);
      c.unicycle.sigma2 = s(1);
      c.unicycle.sigma3 = s(2);
    }
    read(u, "goal_radius", c.unicycle.goal_radius, "unicycle");
  }

  if (const auto p = root["clf"]) {
    check_keys(p, "clf", {"p1", "p2", "p3"});
    read(p, "p1", c.clf.p1, "clf");
    read(p, "p2", c.clf.p2, "clf");
    read(p, "p3", c.clf.p3, "clf");
  }

  if (const auto obs = root["obstacles"]) {
    if (!obs.IsSequence()) throw ConfigError("obstacles: expected a list");
    c.barriers.clear();
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const std::string where = "obstacles[" + std::to_string(i) + "]";
      const auto o = obs[i];
      check_keys(o, where, {"center", "l_D", "l_X", "B_min", "B_max", "kb_a", "kb_b"});
      BarrierSpec b;
      if (!o["center"]) throw ConfigError(where + ": missing center");
      const Vector ctr = read_vector(o["center"], where + ".center");
      if (ctr.size() != 2) throw ConfigError(where + ".center: expected 2 entries");
      b.center = ctr;
      read(o, "l_D", b.l_D, where);
      read(o, "l_X", b.l_X, where);
      read(o, "B_min", b.B_min, where);
      read(o, "B_max", b.B_max, where);
      read(o, "kb_a", b.kb_a, where);
      read(o, "kb_b", b.kb_b, where);
      c.barriers.push_back(b);
    }
  }

  if (const auto k = root["clbf"]) {
    check_keys(k, "clbf", {"c1", "c2", "k_lambda", "rho"});
    read(k, "c1", c.clbf.c1, "clbf");
    read(k, "c2", c.clbf.c2, "clbf");
    read(k, "rho", c.clbf.rho, "clbf");
    if (k["k_lambda"]) {
      const Vector kl = read_vector(k["k_lambda"], "clbf.k_lambda");
      c.clbf.k_lambda.assign(kl.data(), kl.data() + kl.size());
    }
  }

  if (const auto m = root["mpc"]) {
    check_keys(m, "mpc", {"horizon", "period", "Q", "R", "input_min", "input_max", "eps_dec", "clearance", "solver"});
    read(m, "horizon", c.mpc.horizon, "mpc");
    read(m, "period", c.mpc.period, "mpc");
    read(m, "eps_dec", c.mpc.eps_dec, "mpc");
    read(m, "clearance", c.mpc.clearance, "mpc");
    if (m["Q"]) c.mpc.Q = read_matrix(m["Q"], "mpc.Q");
    if (m["R"]) c.mpc.R = read_matrix(m["R"], "mpc.R");
    if (m["input_min"]) c.mpc.box.u_min = read_vector(m["input_min"], "mpc.input_min");
    if (m["input_max"]) c.mpc.box.u_max = read_vector(m["input_max"], "mpc.input_max");
    if (const auto s = m["solver"]) {
      check_keys(s, "mpc.solver", {"max_iter", "tol", "restarts", "seed", "input_regularization"});
      read(s, "max_iter", c.mpc.solver.max_iter, "mpc.solver");
      read(s, "tol", c.mpc.solver.tol, "mpc.solver");
      read(s, "restarts", c.mpc.solver.restarts, "mpc.solver");
      read(s, "seed", c.mpc.solver.seed, "mpc.solver");
      read(s, "input_regularization", c.mpc.solver.input_regularization, "mpc.solver");
    }
  }

  if (const auto s = root["simulation"]) {
    check_keys(s, "simulation", {"initial_state", "duration", "substeps", "seed", "runs", "goal_threshold"});
    if (s["initial_state"]) c.initial_state = read_vector(s["initial_state"], "simulation.initial_state");
    read(s, "duration", c.duration, "simulation");
    read(s, "substeps", c.substeps, "simulation");
    read(s, "seed", c.seed, "simulation");
    read(s, "runs", c.runs, "simulation");
    read(s, "goal_threshold", c.goal_threshold, "simulation");
  }
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

std::string scenario_to_yaml(const ScenarioConfig& c) {
  YAML::Node root;
  root["name"] = c.name;
  root["unicycle"]["sigma"] = vector_node(Eigen::Vector3d(c.unicycle.sigma1, c.unicycle.sigma2, c.unicycle.sigma3));
  root["unicycle"]["goal_radius"] = c.unicycle.goal_radius;
  root["clf"]["p1"] = c.clf.p1;
  root["clf"]["p2"] = c.clf.p2;
  root["clf"]["p3"] = c.clf.p3;
  YAML::Node obs(YAML::NodeType::Sequence);
  for (const auto& b : c.barriers) {
    YAML::Node o;
    o["center"] = vector_node(b.center);
    o["l_D"] = b.l_D;
    o["l_X"] = b.l_X;
    o["B_min"] = b.B_min;
    o["B_max"] = b.B_max;
    o["kb_a"] = b.kb_a;
    o["kb_b"] = b.kb_b;
    obs.push_back(o);
  }
  root["obstacles"] = obs;
  root["clbf"]["c1"] = c.clbf.c1;
  root["clbf"]["c2"] = c.clbf.c2;
  root["clbf"]["k_lambda"] = vector_node(Eigen::Map<const Vector>(c.clbf.k_lambda.data(), c.clbf.k_lambda.size()));
  root["clbf"]["rho"] = c.clbf.rho;
  root["mpc"]["horizon"] = c.mpc.horizon;
  root["mpc"]["period"] = c.mpc.period;
  root["mpc"]["Q"] = matrix_node(c.mpc.Q);
  root["mpc"]["R"] = matrix_node(c.mpc.R);
  root["mpc"]["input_min"] = vector_node(c.mpc.box.u_min);
  root["mpc"]["input_max"] = vector_node(c.mpc.box.u_max);
  root["mpc"]["eps_dec"] = c.mpc.eps_dec;
  root["mpc"]["clearance"] = c.mpc.clearance;
  root["mpc"]["solver"]["max_iter"] = c.mpc.solver.max_iter;
  root["mpc"]["solver"]["tol"] = c.mpc.solver.tol;
  root["mpc"]["solver"]["restarts"] = c.mpc.solver.restarts;
  root["mpc"]["solver"]["seed"] = c.mpc.solver.seed;
  root["mpc"]["solver"]["input_regularization"] = c.mpc.solver.input_regularization;
  root["simulation"]["initial_state"] = vector_node(c.initial_state);
  root["simulation"]["duration"] = c.duration;
  root["simulation"]["substeps"] = c.substeps;
  root["simulation"]["seed"] = c.seed;
  root["simulation"]["runs"] = c.runs;
  root["simulation"]["goal_threshold"] = c.goal_threshold;

  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << root;
  return std::string(out.c_str()) + "\n";
}

std::vector<std::string> validate_scenario(const ScenarioConfig& c) {
  std::vector<std::string> report;
  if (!c.unicycle.valid()) report.emplace_back("unicycle: noise levels must be >= 0 and goal_radius > 0");
  for (ClfCondition cond : validate_clf_params(c.clf, c.unicycle)) report.push_back("clf: violates " + to_string(cond));
  for (std::size_t i = 0; i < c.barriers.size(); ++i) {
    if (!c.barriers[i].valid()) {
      report.push_back("obstacles[" + std::to_string(i) +
                       "]: need 0 < l_D < l_X, B_min < 0 < B_min + B_max, kb_a >= 0, kb_b > 0");
    }
  }
  try {
    compute_coefficients(c.clf, c.barriers, c.clbf.c1, c.clbf.c2, c.clbf.k_lambda);
  } catch (const std::exception& e) {
    report.push_back(std::string("clbf: ") + e.what());
  }
  if (!(c.clbf.rho > 0)) report.emplace_back("clbf: rho must be positive");
  for (const auto& p : c.mpc.problems()) report.push_back("mpc: " + p);
  if (c.mpc.box.u_min.size() != 2) report.emplace_back("mpc: input box must have 2 entries (v, omega)");
  if (c.mpc.Q.rows() != 3) report.emplace_back("mpc: Q must be 3x3");
  if (c.mpc.R.rows() != 2) report.emplace_back("mpc: R must be 2x2");
  if (c.initial_state.size() != 3 || !c.initial_state.allFinite()) {
    report.emplace_back("simulation: initial_state must hold 3 finite numbers");
  } else {
    for (std::size_t i = 0; i < c.barriers.size(); ++i) {
      if (obstacle_F(c.barriers[i], c.initial_state).value < c.barriers[i].l_D) {
        report.push_back("simulation: initial_state lies inside obstacle " + std::to_string(i));
      }
    }
  }
  if (!(c.duration > 0)) report.emplace_back("simulation: duration must be positive");
  if (c.substeps < 1) report.emplace_back("simulation: substeps must be >= 1");
  if (c.runs < 1) report.emplace_back("simulation: runs must be >= 1");
  if (!(c.goal_threshold > 0)) report.emplace_back("simulation: goal_threshold must be positive");
  return report;
}

}  // namespace clbf
