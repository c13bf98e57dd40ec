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

// Event-based hybrid iLQR for the nominal (mean) trajectory.
//
// The discrete dynamics are the RK4 steps of the rollout. A step that
// contains an event is linearized as
//
//   dx_{k+1} = Phi_post Xi Phi_pre dx_k + (...) du_k,
//
// with Phi_pre, Phi_post the Jacobians of the partial steps before and after
// the event and Xi the saltation matrix of the event, so the value function
// passes through the event as Xi' V+ Xi. Event times are not optimized.
//
// With controls held over each step the sampled cost has a kink whenever an
// event crosses a grid node. An event found on a node is kept there by a
// penalty on its first-order timing during the backward pass.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "hcs/hybrid_model.hpp"
#include "hcs/smooth_steering.hpp"

namespace hcs {

struct IlqrConfig {
  Matrix terminal_cost;  // Q_T
  Vector goal;           // m_T, in the terminal mode's coordinates
  // Running control weight per mode id; identity when absent.
  std::map<int, Matrix> control_weight;
  // Adds 0.5 x'Q x dt with each mode's state cost.
  bool running_state_cost = false;
  int max_iterations = 200;
  double tolerance = 1e-8;  // relative cost decrease
  std::vector<double> line_search{1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125,
                                  0.00390625, 0.001953125, 0.0009765625};
  double regularization = 0.0;  // initial Levenberg term on Q_uu
  // Optional warm start, one control per step (size mismatches become zero).
  std::vector<Vector> initial_controls;
};

struct NominalPlan {
  TrajectoryBundle trajectory;
  // Discrete step Jacobians along the trajectory, n_{k+1} x n_k and n_{k+1} x m_k.
  std::vector<Matrix> step_a, step_b;
  std::vector<Matrix> gains;         // K_k
  std::vector<Vector> feedforward;   // k_k
  std::vector<double> cost_history;  // accepted iterates, first entry is the initial rollout
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  // max |dJ/du| along the returned trajectory.
  double gradient_norm = 0.0;
  // max |dJ/du| after removing, by least squares, the timing directions of
  // events that sit on a grid node. The sampled cost has a kink there because
  // the held control switches at the node, so only this part has to vanish.
  double stationarity = 0.0;
  std::vector<std::string> warnings;
};

/// Linear problem data along a nominal: one segment per mode visit, with the
/// event times placed exactly on segment boundaries.
struct HybridLinearization {
  std::vector<int> modes;
  std::vector<LinearSegmentd> segments;
  std::vector<Matrix> xis;
  std::vector<double> event_times;
  std::vector<SaltationEvent> events;
};

/// Sum of 0.5 u'R u dt (plus the running state cost if enabled) and
/// 0.5 (x_N - m_T)' Q_T (x_N - m_T).
double trajectory_cost(const HybridSystemSpec& system, const TrajectoryBundle& traj,
                       const IlqrConfig& config);

/// Jacobians of the discrete step map x_k -> x_{k+1} along `traj`. The step's
/// control is held after an event when the new mode has the same input size
/// and is zero otherwise, as in the rollout.
void step_jacobians(const HybridSystemSpec& system, const TrajectoryBundle& traj, std::size_t k,
                    Matrix& a, Matrix& b);

/// dJ/du_k by an adjoint sweep over the given step Jacobians.
std::vector<Vector> cost_gradient(const HybridSystemSpec& system, const TrajectoryBundle& traj,
                                  const IlqrConfig& config, const std::vector<Matrix>& a,
                                  const std::vector<Matrix>& b);

/// d t_e / du_k for event e, to first order. Empty when another event precedes
/// it inside the same step.
std::vector<Vector> event_time_gradient(const HybridSystemSpec& system,
                                        const TrajectoryBundle& traj, std::size_t e,
                                        const std::vector<Matrix>& a,
                                        const std::vector<Matrix>& b);

NominalPlan solve_hilqr(const HybridSystemSpec& system, const Vector& x0,
                        const IlqrConfig& config);

/// Events that sit on a grid node take u- from the step ending at the node and
/// u+ from the step starting there, with Xi recomputed. A mode visit then keeps
/// its own control on both sides of the node, which is how the closed loop
/// continues it when a perturbed crossing lands on the other side.
TrajectoryBundle snap_node_events(const HybridSystemSpec& system, TrajectoryBundle traj);

/// Uses snap_node_events first; the returned events carry the snapped values.
HybridLinearization linearize_along(const TrajectoryBundle& traj, const HybridSystemSpec& system);
inline HybridLinearization linearize_along(const NominalPlan& plan,
                                           const HybridSystemSpec& system) {
  return linearize_along(plan.trajectory, system);
}

}  // namespace hcs
