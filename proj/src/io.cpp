/*
 Copyright 2026 The hcs Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "hcs/io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace hcs {

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::kConfig, what); }

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) config_error(std::string("missing field '") + key + "'");
  return j.at(key);
}

template <typename T>
T value_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    config_error(std::string("field '") + key + "': " + e.what());
  }
}

std::vector<Matrix> matrices_from_json(const Json& j) {
  std::vector<Matrix> out;
  for (const auto& m : j) out.push_back(matrix_from_json(m));
  return out;
}

Json list_to_json(const std::vector<Matrix>& ms) {
  Json out = Json::array();
  for (const auto& m : ms) out.push_back(to_json(m));
  return out;
}

Json list_to_json(const std::vector<Vector>& vs) {
  Json out = Json::array();
  for (const auto& v : vs) out.push_back(to_json(v));
  return out;
}

std::vector<Vector> vectors_from_json(const Json& j) {
  std::vector<Vector> out;
  for (const auto& v : j) out.push_back(vector_from_json(v));
  return out;
}

Json system_to_json(const HybridSystemSpec& sys) {
  Json j;
  if (sys.name == "bouncing_ball" || sys.name == "slip") {
    j["builtin"] = sys.name;
    Json params = Json::object();
    for (const auto& [k, v] : sys.params) params[k] = v;
    params["dt"] = sys.dt;
    params["horizon"] = sys.horizon;
    j["params"] = params;
    return j;
  }
  if (sys.modes.size() != 1 || !sys.transitions.empty()) {
    config_error("only builtin systems and single linear modes can be written");
  }
  const ModeSpec& mode = sys.modes.front();
  const Vector x = Vector::Zero(mode.state_dim), u = Vector::Zero(mode.input_dim);
  j["linear"] = {{"a", to_json(mode.flow_jacobian_x(0.0, x, u))},
                 {"b", to_json(mode.flow_jacobian_u(0.0, x, u))}};
  j["dt"] = sys.dt;
  j["horizon"] = sys.horizon;
  return j;
}

HybridSystemSpec system_from_json(const Json& j) {
  if (j.contains("builtin")) {
    const std::string name = j.at("builtin").get<std::string>();
    const Json params = j.value("params", Json::object());
    if (name == "bouncing_ball") {
      BouncingBallParams p;
      p.mass = value_or(params, "mass", p.mass);
      p.gravity = value_or(params, "gravity", p.gravity);
      p.restitution = value_or(params, "restitution", p.restitution);
      p.dt = value_or(params, "dt", p.dt);
      p.horizon = value_or(params, "horizon", p.horizon);
      p.apex_transition = value_or(params, "apex_transition", 0.0) != 0.0;
      return bouncing_ball(p);
    }
    if (name == "slip") {
      SlipParams p;
      p.mass = value_or(params, "mass", p.mass);
      p.stiffness = value_or(params, "stiffness", p.stiffness);
      p.rest_length = value_or(params, "rest_length", p.rest_length);
      p.gravity = value_or(params, "gravity", p.gravity);
      p.toe_x = value_or(params, "toe_x", p.toe_x);
      p.dt = value_or(params, "dt", p.dt);
      p.horizon = value_or(params, "horizon", p.horizon);
      return slip(p);
    }
    config_error("unknown builtin system '" + name + "'");
  }
  if (j.contains("linear")) {
    HybridSystemSpec sys;
    sys.name = "linear";
    const Matrix a = matrix_from_json(field(j.at("linear"), "a"));
    const Matrix b = matrix_from_json(field(j.at("linear"), "b"));
    if (a.rows() != a.cols() || b.rows() != a.rows()) config_error("linear system shapes");
    sys.modes.push_back(ModeSpec::linear(0, a, b));
    sys.dt = field(j, "dt").get<double>();
    sys.horizon = field(j, "horizon").get<double>();
    return sys;
  }
  config_error("system needs 'builtin' or 'linear'");
}

}  // namespace

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    out.push_back(std::move(row));
  }
  return out;
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) config_error("matrix must be an array of rows");
  const auto rows = Eigen::Index(j.size());
  const auto cols = rows ? Eigen::Index(j.front().size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j.at(std::size_t(i));
    if (!row.is_array() || Eigen::Index(row.size()) != cols) config_error("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row.at(std::size_t(c)).is_number()) config_error("matrix entries must be numbers");
      m(i, c) = row.at(std::size_t(c)).get<double>();
    }
  }
  return m;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) config_error("vector must be an array");
  Vector v(Eigen::Index(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j.at(i).is_number()) config_error("vector entries must be numbers");
    v(Eigen::Index(i)) = j.at(i).get<double>();
  }
  return v;
}

Experiment experiment_from_json(const Json& j) {
  Experiment ex;
  try {
    ex.name = value_or<std::string>(j, "name", "custom");
    ex.system = system_from_json(field(j, "system"));
    ex.system.validate();
    ex.x0 = vector_from_json(field(j, "x0"));
    const Json nominal = j.value("nominal", Json::object());
    const Eigen::Index n0 = ex.system.mode(ex.system.initial_mode).state_dim;
    if (ex.x0.size() != n0) config_error("x0 has the wrong size");
    if (nominal.contains("terminal_cost")) {
      ex.ilqr.terminal_cost = matrix_from_json(nominal.at("terminal_cost"));
      ex.ilqr.goal = vector_from_json(field(nominal, "goal"));
    } else {
      ex.ilqr.terminal_cost = Matrix::Zero(n0, n0);
      ex.ilqr.goal = Vector::Zero(n0);
    }
    ex.ilqr.max_iterations = value_or(nominal, "max_iterations", ex.ilqr.max_iterations);
    ex.ilqr.tolerance = value_or(nominal, "tolerance", ex.ilqr.tolerance);
    ex.sigma0 = matrix_from_json(field(j, "sigma0"));
    ex.sigma_t = matrix_from_json(field(j, "sigma_t"));
    ex.epsilon = field(j, "epsilon").get<double>();
    if (!(ex.epsilon > 0.0)) config_error("epsilon must be positive");
    if (ex.sigma0.rows() != n0 || ex.sigma0.cols() != n0) config_error("sigma0 shape");
    if (ex.sigma_t.rows() != ex.sigma_t.cols()) config_error("sigma_t must be square");
    const Json sdp = j.value("sdp", Json::object());
    ex.sdp.eta_schedule = value_or(sdp, "eta_schedule", ex.sdp.eta_schedule);
    ex.sdp.extrapolate = value_or(sdp, "extrapolate", ex.sdp.extrapolate);
    ex.sdp.tolerance = value_or(sdp, "tolerance", ex.sdp.tolerance);
    ex.sdp.max_iterations = value_or(sdp, "max_iterations", ex.sdp.max_iterations);
  } catch (const Json::exception& e) {
    config_error(e.what());
  }
  return ex;
}

Json experiment_to_json(const Experiment& ex) {
  Json j;
  j["name"] = ex.name;
  j["system"] = system_to_json(ex.system);
  j["x0"] = to_json(ex.x0);
  j["nominal"] = {{"terminal_cost", to_json(ex.ilqr.terminal_cost)},
                  {"goal", to_json(ex.ilqr.goal)},
                  {"max_iterations", ex.ilqr.max_iterations},
                  {"tolerance", ex.ilqr.tolerance}};
  j["sigma0"] = to_json(ex.sigma0);
  j["sigma_t"] = to_json(ex.sigma_t);
  j["epsilon"] = ex.epsilon;
  j["sdp"] = {{"eta_schedule", ex.sdp.eta_schedule},
              {"extrapolate", ex.sdp.extrapolate},
              {"tolerance", ex.sdp.tolerance},
              {"max_iterations", ex.sdp.max_iterations}};
  return j;
}

Experiment load_experiment(const std::filesystem::path& path) {
  return experiment_from_json(read_json(path));
}

Experiment builtin_experiment(const std::string& name) {
  if (name == "bouncing_ball" || name == "bouncing-ball") return bouncing_ball_experiment();
  if (name == "slip") return slip_experiment();
  config_error("unknown experiment '" + name + "'");
}

Json trajectory_to_json(const TrajectoryBundle& traj) {
  Json events = Json::array();
  for (const auto& ev : traj.events) {
    events.push_back({{"t_minus", ev.t_minus},
                      {"t_plus", ev.t_plus},
                      {"from_mode", ev.from_mode},
                      {"to_mode", ev.to_mode},
                      {"transition", ev.transition},
                      {"step", ev.step},
                      {"x_minus", to_json(ev.x_minus)},
                      {"x_plus", to_json(ev.x_plus)},
                      {"u_minus", to_json(ev.u_minus)},
                      {"u_plus", to_json(ev.u_plus)},
                      {"xi", to_json(ev.xi)}});
  }
  return {{"times", traj.times},
          {"modes", traj.modes},
          {"states", list_to_json(traj.states)},
          {"controls", list_to_json(traj.controls)},
          {"events", events}};
}

TrajectoryBundle trajectory_from_json(const Json& j) {
  TrajectoryBundle traj;
  try {
    traj.times = field(j, "times").get<std::vector<double>>();
    traj.modes = field(j, "modes").get<std::vector<int>>();
    traj.states = vectors_from_json(field(j, "states"));
    traj.controls = vectors_from_json(field(j, "controls"));
    for (const auto& e : field(j, "events")) {
      SaltationEvent ev;
      ev.t_minus = e.at("t_minus").get<double>();
      ev.t_plus = e.at("t_plus").get<double>();
      ev.from_mode = e.at("from_mode").get<int>();
      ev.to_mode = e.at("to_mode").get<int>();
      ev.transition = e.at("transition").get<std::size_t>();
      ev.step = e.at("step").get<std::size_t>();
      ev.x_minus = vector_from_json(e.at("x_minus"));
      ev.x_plus = vector_from_json(e.at("x_plus"));
      ev.u_minus = vector_from_json(e.at("u_minus"));
      ev.u_plus = vector_from_json(e.at("u_plus"));
      ev.xi = matrix_from_json(e.at("xi"));
      traj.events.push_back(std::move(ev));
    }
  } catch (const Json::exception& e) {
    config_error(std::string("trajectory: ") + e.what());
  }
  if (traj.states.size() != traj.times.size() || traj.controls.size() + 1 != traj.times.size()) {
    config_error("trajectory array lengths disagree");
  }
  return traj;
}

Json solution_to_json(const HybridSteeringSolutiond& sol) {
  Json segments = Json::array();
  for (const auto& s : sol.segments) {
    segments.push_back({{"times", s.times},
                        {"pi", list_to_json(s.pi)},
                        {"h", list_to_json(s.h)},
                        {"sigma", list_to_json(s.sigma)},
                        {"gain", list_to_json(s.gain)}});
  }
  Json jumps = Json::array();
  for (const auto& jr : sol.jumps) {
    jumps.push_back({{"time", jr.time},
                     {"xi", to_json(jr.xi)},
                     {"sigma_minus", to_json(jr.sigma_minus)},
                     {"sigma_plus", to_json(jr.sigma_plus)},
                     {"pi_minus", to_json(jr.pi_minus)},
                     {"pi_plus", to_json(jr.pi_plus)},
                     {"pi_jump_residual", pi_jump_residual(jr)}});
  }
  return {{"segments", segments}, {"jumps", jumps}, {"cost", sol.cost}};
}

Json sdp_to_json(const SdpSolution& sol) {
  Json levels = Json::array();
  for (const auto& l : sol.levels) {
    levels.push_back({{"eta", l.eta},
                      {"iterations", l.iterations},
                      {"objective", l.objective},
                      {"gradient_norm", l.gradient_norm}});
  }
  return {{"sigma_minus", list_to_json(sol.sigma_minus)},
          {"sigma_plus", list_to_json(sol.sigma_plus)},
          {"w", list_to_json(sol.w)},
          {"y", list_to_json(sol.y)},
          {"objective", sol.objective},
          {"eta", sol.eta},
          {"gradient_norm", sol.gradient_norm},
          {"min_domain_margin", sol.min_domain_margin},
          {"iterations", sol.iterations},
          {"extrapolated", sol.extrapolated},
          {"levels", levels}};
}

Json plan_to_json(const Experiment& ex, const SteeringRun& run) {
  Json baseline = Json::array();
  const FeedbackPlan ilqr = ilqr_feedback(run.nominal);
  for (const auto& seg : ilqr.segments) {
    baseline.push_back({{"mode", seg.mode}, {"times", seg.times}, {"gain", list_to_json(seg.gain)}});
  }
  return {{"experiment", experiment_to_json(ex)},
          {"method", std::string(method_name(run.method))},
          {"nominal", trajectory_to_json(run.nominal.trajectory)},
          {"nominal_cost", run.nominal.cost},
          {"solution", solution_to_json(run.solution)},
          {"baseline_gains", baseline}};
}

LoadedPlan plan_from_json(const Json& j) {
  LoadedPlan out;
  out.experiment = experiment_from_json(field(j, "experiment"));
  const TrajectoryBundle nominal = trajectory_from_json(field(j, "nominal"));
  try {
    const Json& segs = field(field(j, "solution"), "segments");
    out.steering.nominal = nominal;
    for (std::size_t v = 0; v < segs.size(); ++v) {
      FeedbackSegment fs;
      fs.mode = v == 0 ? nominal.modes.front() : nominal.events.at(v - 1).to_mode;
      fs.times = segs[v].at("times").get<std::vector<double>>();
      fs.gain = matrices_from_json(segs[v].at("gain"));
      out.steering.segments.push_back(std::move(fs));
      out.schedule.times.push_back(segs[v].at("times").get<std::vector<double>>());
      out.schedule.sigma.push_back(matrices_from_json(segs[v].at("sigma")));
    }
    out.baseline.nominal = nominal;
    for (const auto& b : field(j, "baseline_gains")) {
      FeedbackSegment fs;
      fs.mode = b.at("mode").get<int>();
      fs.times = b.at("times").get<std::vector<double>>();
      fs.gain = matrices_from_json(b.at("gain"));
      out.baseline.segments.push_back(std::move(fs));
    }
  } catch (const Json::exception& e) {
    config_error(std::string("plan: ") + e.what());
  } catch (const std::out_of_range& e) {
    config_error(std::string("plan: ") + e.what());
  }
  out.steering.validate();
  out.baseline.validate();
  return out;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    config_error(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) config_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) config_error("cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

}  // namespace hcs
