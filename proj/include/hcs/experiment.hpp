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

// Nominal plan, linearization and covariance steering in one pipeline.

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "hcs/hybrid_analytic.hpp"
#include "hcs/hybrid_model.hpp"
#include "hcs/nominal_ilqr.hpp"
#include "hcs/sdp_steering.hpp"
#include "hcs/sim_harness.hpp"

namespace hcs {

enum class SteeringMethod { kAuto, kAnalytic, kSdp };

SteeringMethod parse_method(std::string_view name);
std::string_view method_name(SteeringMethod m);

struct Experiment {
  std::string name;
  HybridSystemSpec system;
  Vector x0;
  IlqrConfig ilqr;
  Matrix sigma0, sigma_t;
  double epsilon = 1.0;
  SdpOptions sdp;
};

/// Ball from [5, 1.5] to [2.5, 0] with one impact, Sigma0 = 0.2 I,
/// SigmaT = 0.05 I, eps = 0.5.
Experiment bouncing_ball_experiment();

/// SLIP stance to flight, Sigma0 = 0.002 I4, SigmaT = 0.0003 I5, eps = 0.0015.
Experiment slip_experiment();

struct SteeringRun {
  NominalPlan nominal;
  HybridLinearization linearization;
  HybridSteeringSolutiond solution;
  SteeringMethod method = SteeringMethod::kAnalytic;  // the one actually used
  std::optional<SdpSolution> sdp;
  double nominal_seconds = 0.0;
  double steering_seconds = 0.0;

  FeedbackPlan feedback() const { return steering_feedback(nominal.trajectory, solution); }
  PlannedSchedule schedule() const { return PlannedSchedule::from(solution); }
};

/// Steers the covariance about an already computed nominal. `kAuto` picks the
/// analytic solution when every saltation matrix is invertible.
SteeringRun steer_about(const Experiment& ex, NominalPlan nominal, SteeringMethod method);

SteeringRun run_steering(const Experiment& ex, SteeringMethod method);

}  // namespace hcs
