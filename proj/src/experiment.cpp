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

#include "hcs/experiment.hpp"

#include <chrono>
#include <numbers>

namespace hcs {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Vector vec(std::initializer_list<double> v) {
  Vector out(Eigen::Index(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

SteeringMethod parse_method(std::string_view name) {
  if (name == "auto") return SteeringMethod::kAuto;
  if (name == "analytic") return SteeringMethod::kAnalytic;
  if (name == "sdp") return SteeringMethod::kSdp;
  throw Error(ErrorCode::kConfig, "unknown method '" + std::string(name) + "'");
}

std::string_view method_name(SteeringMethod m) {
  switch (m) {
    case SteeringMethod::kAuto: return "auto";
    case SteeringMethod::kAnalytic: return "analytic";
    case SteeringMethod::kSdp: return "sdp";
  }
  return "auto";
}

Experiment bouncing_ball_experiment() {
  Experiment ex;
  ex.name = "bouncing_ball";
  ex.system = bouncing_ball();
  ex.x0 = vec({5.0, 1.5});
  ex.ilqr.terminal_cost = 25.0 * Matrix::Identity(2, 2);
  ex.ilqr.goal = vec({2.5, 0.0});
  ex.sigma0 = 0.2 * Matrix::Identity(2, 2);
  ex.sigma_t = 0.05 * Matrix::Identity(2, 2);
  ex.epsilon = 0.5;
  return ex;
}

Experiment slip_experiment() {
  Experiment ex;
  ex.name = "slip";
  ex.system = slip();
  ex.x0 = vec({1.745, -4.0, 0.5, 0.0});
  ex.ilqr.terminal_cost = 2.0 * Matrix::Identity(5, 5);
  ex.ilqr.goal = vec({1.1, 2.25, 1.4, 0.0, std::numbers::pi / 3.0});
  ex.sigma0 = 0.002 * Matrix::Identity(4, 4);
  ex.sigma_t = 0.0003 * Matrix::Identity(5, 5);
  ex.epsilon = 0.0015;
  return ex;
}

SteeringRun steer_about(const Experiment& ex, NominalPlan nominal, SteeringMethod method) {
  SteeringRun run;
  run.nominal = std::move(nominal);
  const auto start = std::chrono::steady_clock::now();
  run.nominal.trajectory = snap_node_events(ex.system, std::move(run.nominal.trajectory));
  run.linearization = linearize_along(run.nominal, ex.system);
  const auto& lin = run.linearization;
  if (method == SteeringMethod::kAuto) {
    method = SteeringMethod::kAnalytic;
    for (const auto& xi : lin.xis) {
      if (!saltation_invertible(xi)) method = SteeringMethod::kSdp;
    }
  }
  run.method = method;
  if (method == SteeringMethod::kAnalytic) {
    run.solution =
        solve_hybrid_analytic(lin.segments, lin.xis, ex.sigma0, ex.sigma_t, ex.epsilon);
  } else {
    SdpProblem p;
    for (const auto& seg : lin.segments) p.segments.push_back(build_prior(seg));
    p.xis = lin.xis;
    p.sigma0 = ex.sigma0;
    p.sigma_t = ex.sigma_t;
    p.epsilon = ex.epsilon;
    p.options = ex.sdp;
    run.sdp = solve_sdp(p);
    run.solution =
        recover_controllers(*run.sdp, lin.segments, lin.xis, ex.sigma0, ex.sigma_t, ex.epsilon);
  }
  run.steering_seconds = seconds_since(start);
  return run;
}

SteeringRun run_steering(const Experiment& ex, SteeringMethod method) {
  const auto start = std::chrono::steady_clock::now();
  NominalPlan nominal = solve_hilqr(ex.system, ex.x0, ex.ilqr);
  const double t_nominal = seconds_since(start);
  SteeringRun run = steer_about(ex, std::move(nominal), method);
  run.nominal_seconds = t_nominal;
  return run;
}

}  // namespace hcs
