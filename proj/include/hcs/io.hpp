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

// JSON and CSV persistence. Matrices are row-major nested arrays; doubles are
// written with round-trip precision so a reloaded plan is bit-identical.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hcs/experiment.hpp"
#include "json.hpp"

namespace hcs {

using Json = nlohmann::json;

Json to_json(const Matrix& m);
Json to_json(const Vector& v);
Matrix matrix_from_json(const Json& j);
Vector vector_from_json(const Json& j);

/// Experiment config. The system block is either a builtin
///   {"builtin": "bouncing_ball" | "slip", "params": {...}}
/// or a single linear mode
///   {"linear": {"a": [[...]], "b": [[...]]}, "dt": .., "horizon": ..}.
/// Throws `config-error` on anything malformed.
Experiment experiment_from_json(const Json& j);
Json experiment_to_json(const Experiment& ex);
Experiment load_experiment(const std::filesystem::path& path);

/// Accepts "bouncing_ball", "bouncing-ball" and "slip".
Experiment builtin_experiment(const std::string& name);

Json trajectory_to_json(const TrajectoryBundle& traj);
TrajectoryBundle trajectory_from_json(const Json& j);

Json solution_to_json(const HybridSteeringSolutiond& sol);
Json sdp_to_json(const SdpSolution& sol);

/// Everything `simulate` needs: the resolved experiment, the nominal, the
/// steering gains and planned covariances, and the iLQR gains as a baseline.
Json plan_to_json(const Experiment& ex, const SteeringRun& run);

struct LoadedPlan {
  Experiment experiment;
  FeedbackPlan steering;
  FeedbackPlan baseline;
  PlannedSchedule schedule;
};
LoadedPlan plan_from_json(const Json& j);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

/// Header line then one line per row, values at round-trip precision.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace hcs
