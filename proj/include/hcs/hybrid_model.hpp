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

// Hybrid systems: smooth flows per mode, guards that trigger transitions, and
// resets applied at the crossing. Events are located by bisection inside a
// fixed-step RK4 grid, and each event carries its saltation matrix
//
//   Xi = dR/dx + (F+ - dR/dx F- - dR/dt) dg/dx / (dg/dt + dg/dx F-).

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hcs/linalg.hpp"
#include "hcs/smooth_steering.hpp"

namespace hcs {

using DriftFn = std::function<Vector(double t, const Vector& x, const Vector& u)>;
using DriftJacobianFn = std::function<Matrix(double t, const Vector& x, const Vector& u)>;
using GuardFn = std::function<double(double t, const Vector& x)>;
using GuardGradientFn = std::function<Vector(double t, const Vector& x)>;
using ResetFn = std::function<Vector(double t, const Vector& x)>;
using ResetJacobianFn = std::function<Matrix(double t, const Vector& x)>;

struct ModeSpec {
  int id = 0;
  std::string name;
  Eigen::Index state_dim = 0;
  Eigen::Index input_dim = 0;
  DriftFn drift;
  // Optional analytic Jacobians; central differences otherwise.
  DriftJacobianFn jacobian_x;
  DriftJacobianFn jacobian_u;
  // Noise enters through this gain; defaults to the input Jacobian.
  DriftJacobianFn noise_gain;
  // Running state cost for steering, constant over the mode. Zero if empty.
  Matrix state_cost;

  Vector flow(double t, const Vector& x, const Vector& u) const { return drift(t, x, u); }
  Matrix flow_jacobian_x(double t, const Vector& x, const Vector& u) const;
  Matrix flow_jacobian_u(double t, const Vector& x, const Vector& u) const;
  Matrix noise(double t, const Vector& x, const Vector& u) const;
  Matrix cost() const;

  /// dx = A(t) x + B(t) u on a time grid, A and B linearly interpolated and
  /// held constant outside the grid.
  static ModeSpec linear(int id, const LinearSegmentd& grid, std::string name = {});
  static ModeSpec linear(int id, const Matrix& a, const Matrix& b,
                         const Matrix& q = Matrix(), std::string name = {});
};

/// Which sign change of the guard triggers the transition. The default is a
/// mode whose domain is {g > 0}.
enum class Crossing { kDecreasing, kIncreasing, kEither };

struct TransitionSpec {
  int from_mode = 0;
  int to_mode = 0;
  std::string name;
  Crossing crossing = Crossing::kDecreasing;
  GuardFn guard;
  GuardGradientFn guard_gradient_x;  // optional
  GuardFn guard_dt;                  // optional
  ResetFn reset;
  ResetJacobianFn reset_jacobian_x;  // optional
  ResetFn reset_dt;                  // optional

  Vector guard_grad_x(double t, const Vector& x) const;
  double guard_grad_t(double t, const Vector& x) const;
  Matrix reset_jac_x(double t, const Vector& x) const;
  Vector reset_jac_t(double t, const Vector& x) const;
};

struct HybridSystemSpec {
  std::string name;
  std::vector<ModeSpec> modes;
  std::vector<TransitionSpec> transitions;
  double dt = 1e-3;
  double horizon = 1.0;
  int max_events = 16;
  int initial_mode = 0;
  /// Free-form numeric parameters of builtin systems (m, g, e2, ...).
  std::map<std::string, double> params;

  const ModeSpec& mode(int id) const;
  std::vector<const TransitionSpec*> transitions_from(int id) const;
  std::size_t step_count() const;
  void validate() const;
};

struct SaltationEvent {
  double t_minus = 0.0;
  double t_plus = 0.0;
  int from_mode = 0;
  int to_mode = 0;
  std::size_t transition = 0;
  // Grid interval [t_k, t_k+1) that contains the event.
  std::size_t step = 0;
  Vector x_minus, x_plus;
  Vector u_minus, u_plus;
  Matrix xi;
  double condition = 0.0;
  bool invertible = false;
};

/// Nominal trajectory on the uniform grid. `modes[k]` and `states[k]` are the
/// values at node k (post-event if an event fell inside interval k - 1);
/// `controls[k]` is held on [t_k, t_k+1) in mode `modes[k]`.
struct TrajectoryBundle {
  std::vector<double> times;
  std::vector<int> modes;
  std::vector<Vector> states;
  std::vector<Vector> controls;
  std::vector<SaltationEvent> events;

  std::size_t steps() const { return controls.size(); }
};

/// Control law queried at the start of every interval and again after an
/// event inside it (with the post-event mode and state).
using ControlPolicy =
    std::function<Vector(std::size_t step, double t, int mode, const Vector& x)>;

/// Replays a control schedule; a post-event query whose dimension differs from
/// the scheduled control gets zero input.
ControlPolicy schedule_policy(std::vector<Vector> controls);

struct EventLocation {
  std::size_t step = 0;
  double t = 0.0;
  Vector x;
};

/// One RK4 step of a mode's flow with the control held.
Vector rk4_step(const ModeSpec& mode, double t, const Vector& x, const Vector& u, double h);

/// First crossing of `transition` along the sampled trajectory. Returns
/// nullopt when the guard never changes sign in the triggering direction.
/// Throws `tangential-crossing` when the guard rate vanishes at the root.
std::optional<EventLocation> detect_event(const ModeSpec& mode, const TransitionSpec& transition,
                                          const std::vector<double>& times,
                                          const std::vector<Vector>& states,
                                          const std::vector<Vector>& controls);

/// detect_event that throws `no-crossing` instead of returning nullopt.
EventLocation require_event(const ModeSpec& mode, const TransitionSpec& transition,
                            const std::vector<double>& times, const std::vector<Vector>& states,
                            const std::vector<Vector>& controls);

struct StepCrossing {
  double s = 0.0;  // offset from the interval start
  Vector x;        // state at the crossing
  std::size_t transition = 0;
};

/// Earliest guard crossing among `candidates` inside [t, t + h], with the
/// state along the step given by `state_at(s)`. Used by the rollout and the
/// stochastic simulator alike.
std::optional<StepCrossing> locate_crossing(
    const HybridSystemSpec& system, const std::vector<const TransitionSpec*>& candidates,
    double t, double h, const Vector& x_start, const std::function<Vector(double)>& state_at);

/// Saltation matrix at (t, x-); shape n_to x n_from.
Matrix saltation_matrix(const ModeSpec& pre, const ModeSpec& post,
                        const TransitionSpec& transition, double t, const Vector& x_minus,
                        const Vector& u_minus, const Vector& u_plus);

/// Fixed-step RK4 rollout with exact resets at every detected event.
TrajectoryBundle rollout_deterministic(const HybridSystemSpec& system, const Vector& x0,
                                       const ControlPolicy& policy);
TrajectoryBundle rollout_deterministic(const HybridSystemSpec& system, const Vector& x0,
                                       const std::vector<Vector>& controls);

/// Central-difference Jacobian of f: R^n -> R^m.
Matrix numeric_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                        double rel_step = 1e-6);

struct BouncingBallParams {
  double mass = 1.0;
  double gravity = 9.81;
  double restitution = 0.6;
  double dt = 0.0015;
  double horizon = 2.0;
  // Adds the apex transition (zero velocity, identity reset) between a rising
  // and a falling mode. Its saltation matrix is the identity.
  bool apex_transition = false;
};

/// Vertical ball with force input: z'' = (u - m g) / m, impact at z = 0 with
/// velocity reset -e2 * z'.
HybridSystemSpec bouncing_ball(const BouncingBallParams& p = {});

struct SlipParams {
  double mass = 0.5;
  double stiffness = 25.0;
  double rest_length = 1.0;
  double gravity = 9.81;
  double toe_x = 0.0;
  double dt = 5e-5;
  double horizon = 0.5;
};

/// Spring-loaded inverted pendulum. Stance state [theta, theta', r, r'] with
/// two inputs, flight state [px, vx, pz, vz, theta] with three inputs.
HybridSystemSpec slip(const SlipParams& p = {});

}  // namespace hcs
