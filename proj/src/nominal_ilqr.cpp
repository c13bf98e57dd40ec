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

#include "hcs/nominal_ilqr.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace hcs {

namespace {

Matrix control_weight(const IlqrConfig& config, const ModeSpec& mode) {
  const auto it = config.control_weight.find(mode.id);
  if (it == config.control_weight.end()) return Matrix::Identity(mode.input_dim, mode.input_dim);
  if (it->second.rows() != mode.input_dim || it->second.cols() != mode.input_dim) {
    throw Error(ErrorCode::kConfig, "control weight for mode " + std::to_string(mode.id));
  }
  return it->second;
}

// Relative distance (in steps) below which an event counts as on a grid node.
constexpr double kNodeTolerance = 1e-4;
// Weight of the penalty that holds such an event in place within one solve.
constexpr double kPinWeight = 1e8;

// Event time to first order in the state and control of its step:
// dt = dx' dx_k + du' du_k.
struct TimingRow {
  std::size_t step = 0;
  Vector dx, du;
};

std::optional<TimingRow> timing_row(const HybridSystemSpec& system, const TrajectoryBundle& traj,
                                    std::size_t e) {
  const SaltationEvent& ev = traj.events.at(e);
  if (e > 0 && traj.events[e - 1].step == ev.step) return std::nullopt;
  const std::size_t k = ev.step;
  const ModeSpec& mode = system.mode(ev.from_mode);
  const TransitionSpec& tr = system.transitions[ev.transition];
  const Vector grad_g = tr.guard_grad_x(ev.t_minus, ev.x_minus);
  const double rate = grad_g.dot(mode.flow(ev.t_minus, ev.x_minus, ev.u_minus)) +
                      tr.guard_grad_t(ev.t_minus, ev.x_minus);
  const double t = traj.times[k], h = ev.t_minus - t;
  const Vector& x = traj.states[k];
  const Vector& u = traj.controls[k];
  Matrix jx = Matrix::Identity(x.size(), x.size());
  Matrix ju = Matrix::Zero(x.size(), u.size());
  if (h > 0.0) {
    jx = numeric_jacobian([&](const Vector& z) { return rk4_step(mode, t, z, u, h); }, x);
    ju = numeric_jacobian([&](const Vector& v) { return rk4_step(mode, t, x, v, h); }, u);
  }
  const Vector row = -grad_g / rate;
  return TimingRow{k, jx.transpose() * row, ju.transpose() * row};
}

bool on_node(const TrajectoryBundle& traj, const SaltationEvent& ev) {
  const double t0 = traj.times[ev.step], t1 = traj.times[ev.step + 1];
  return std::min(ev.t_minus - t0, t1 - ev.t_minus) <= kNodeTolerance * (t1 - t0);
}

std::vector<const SaltationEvent*> events_in_step(const TrajectoryBundle& traj, std::size_t k) {
  std::vector<const SaltationEvent*> out;
  for (const auto& ev : traj.events) {
    if (ev.step == k) out.push_back(&ev);
  }
  return out;
}

std::vector<int> event_signature(const TrajectoryBundle& traj) {
  std::vector<int> sig;
  for (const auto& ev : traj.events) sig.push_back(static_cast<int>(ev.transition));
  return sig;
}

// Number of events before each step of the nominal.
std::vector<int> visit_index(const TrajectoryBundle& nominal) {
  std::vector<int> visit(nominal.steps(), 0);
  for (const auto& ev : nominal.events) {
    for (std::size_t k = ev.step + 1; k < visit.size(); ++k) ++visit[k];
  }
  return visit;
}

// Nominal step nearest to k with the given mode, or -1.
long nearest_same_mode(const TrajectoryBundle& nominal, std::size_t k, int mode) {
  const long n = static_cast<long>(nominal.steps());
  for (long d = 0; d < n; ++d) {
    for (long j : {long(k) - d, long(k) + d}) {
      if (j >= 0 && j < n && nominal.modes[std::size_t(j)] == mode) return j;
    }
  }
  return -1;
}

// Nominal flow of one side of an event continued to time t with the event's
// control held (forward from x- or backward from x+).
Vector extend_through(const HybridSystemSpec& system, const SaltationEvent& ev, bool pre,
                      double t) {
  const ModeSpec& mode = system.mode(pre ? ev.from_mode : ev.to_mode);
  double s = pre ? ev.t_minus : ev.t_plus;
  Vector x = pre ? ev.x_minus : ev.x_plus;
  const Vector& u = pre ? ev.u_minus : ev.u_plus;
  const int pieces = std::max(1, int(std::ceil(std::abs(t - s) / system.dt)));
  const double h = (t - s) / pieces;
  for (int i = 0; i < pieces; ++i, s += h) x = rk4_step(mode, s, x, u, h);
  return x;
}

struct Reference {
  long step = -1;  // whose control, feedforward and gain apply
  Vector state;
  Matrix map;  // takes the deviation into the nominal's coordinates; identity if empty
};

// Reference for a trial at step k that has seen `trial_visit` events. When the
// trial is on the other side of an event than the nominal, the nominal is
// extended through that event and the deviation carried across by Xi (or its
// pseudo-inverse), which keeps the policy continuous as the trial's event
// crosses a grid node. Modes with a different input size fall back to the
// nearest step of the trial's own mode visit.
Reference reference_for(const HybridSystemSpec& system, const TrajectoryBundle& nominal,
                        const std::vector<int>& visit, std::size_t k, int mode, int trial_visit) {
  const long n = static_cast<long>(nominal.steps());
  const double t = nominal.times[k];
  const Eigen::Index m = system.mode(mode).input_dim;
  const Eigen::Index m_nom = system.mode(nominal.modes[k]).input_dim;
  if (trial_visit < visit[k]) {
    const SaltationEvent& ev = nominal.events[std::size_t(trial_visit)];
    if (ev.from_mode == mode) {
      const Vector ext = extend_through(system, ev, true, t);
      if (m == m_nom && trial_visit + 1 == visit[k]) return {long(k), ext, ev.xi};
      return {long(ev.step), ext, Matrix()};
    }
  } else if (trial_visit > visit[k] && trial_visit <= long(nominal.events.size())) {
    const SaltationEvent& ev = nominal.events[std::size_t(trial_visit - 1)];
    if (ev.to_mode == mode) {
      const Vector ext = extend_through(system, ev, false, t);
      if (m == m_nom && trial_visit == visit[k] + 1) {
        return {long(k), ext, ev.xi.completeOrthogonalDecomposition().pseudoInverse()};
      }
      if (long(ev.step) + 1 < n) return {long(ev.step) + 1, ext, Matrix()};
    }
  }
  const long j = trial_visit == visit[k] && nominal.modes[k] == mode
                     ? long(k)
                     : nearest_same_mode(nominal, k, mode);
  if (j < 0) return {};
  return {j, nominal.states[std::size_t(j)], Matrix()};
}

}  // namespace

double trajectory_cost(const HybridSystemSpec& system, const TrajectoryBundle& traj,
                       const IlqrConfig& config) {
  double j = 0.0;
  for (std::size_t k = 0; k < traj.steps(); ++k) {
    const ModeSpec& mode = system.mode(traj.modes[k]);
    const double h = traj.times[k + 1] - traj.times[k];
    const Vector& u = traj.controls[k];
    j += 0.5 * h * u.dot(control_weight(config, mode) * u);
    if (config.running_state_cost) j += 0.5 * h * traj.states[k].dot(mode.cost() * traj.states[k]);
  }
  const Vector err = traj.states.back() - config.goal;
  return j + 0.5 * err.dot(config.terminal_cost * err);
}

void step_jacobians(const HybridSystemSpec& system, const TrajectoryBundle& traj, std::size_t k,
                    Matrix& a, Matrix& b) {
  const auto evs = events_in_step(traj, k);
  const Vector& u0 = traj.controls[k];
  const double t_end = traj.times[k + 1];
  a = Matrix::Identity(traj.states[k].size(), traj.states[k].size());
  b = Matrix::Zero(traj.states[k].size(), u0.size());

  int mode_id = traj.modes[k];
  double t = traj.times[k];
  Vector x = traj.states[k];
  Vector u = u0;
  for (std::size_t i = 0; i <= evs.size(); ++i) {
    const double t_stop = i < evs.size() ? evs[i]->t_minus : t_end;
    const double h = t_stop - t;
    const ModeSpec& mode = system.mode(mode_id);
    if (h > 0.0) {
      const Matrix jx = numeric_jacobian(
          [&](const Vector& z) { return rk4_step(mode, t, z, u, h); }, x);
      a = jx * a;
      b = jx * b;
      if (u.size() == u0.size()) {
        b += numeric_jacobian([&](const Vector& v) { return rk4_step(mode, t, x, v, h); }, u);
      }
    }
    if (i < evs.size()) {
      a = evs[i]->xi * a;
      b = evs[i]->xi * b;
      mode_id = evs[i]->to_mode;
      t = evs[i]->t_plus;
      x = evs[i]->x_plus;
      u = evs[i]->u_plus;
    }
  }
}

NominalPlan solve_hilqr(const HybridSystemSpec& system, const Vector& x0,
                        const IlqrConfig& config) {
  system.validate();
  NominalPlan plan;

  auto rollout = [&](const ControlPolicy& policy) {
    TrajectoryBundle traj = rollout_deterministic(system, x0, policy);
    const Eigen::Index n = traj.states.back().size();
    if (config.goal.size() != n || config.terminal_cost.rows() != n ||
        config.terminal_cost.cols() != n) {
      throw Error(ErrorCode::kConfig, "goal and terminal cost must match the terminal mode (" +
                                          std::to_string(n) + " states)");
    }
    return traj;
  };

  TrajectoryBundle nominal = rollout(schedule_policy(config.initial_controls));
  double cost = trajectory_cost(system, nominal, config);
  plan.cost_history.push_back(cost);

  const std::size_t n_steps = nominal.steps();
  std::vector<Matrix> a(n_steps), b(n_steps), gains(n_steps);
  std::vector<Vector> ff(n_steps);
  double mu = config.regularization;
  bool relinearize = true;
  std::map<std::size_t, TimingRow> pins;

  // Gauss-Newton backward pass; false when Q_uu is not positive definite.
  auto backward = [&](const TrajectoryBundle& nom, const std::map<std::size_t, TimingRow>& pin_rows,
                      double reg, double& dv1) {
    dv1 = 0.0;
    const Vector err = nom.states.back() - config.goal;
    Matrix vxx = config.terminal_cost;
    Vector vx = config.terminal_cost * err;
    for (std::size_t kk = n_steps; kk-- > 0;) {
      const ModeSpec& mode = system.mode(nom.modes[kk]);
      const double h = nom.times[kk + 1] - nom.times[kk];
      const Matrix r = control_weight(config, mode);
      const Vector& u = nom.controls[kk];
      const Vector& x = nom.states[kk];
      Vector qx = a[kk].transpose() * vx;
      Matrix qxx = a[kk].transpose() * vxx * a[kk];
      if (config.running_state_cost) {
        qx += h * mode.cost() * x;
        qxx += h * mode.cost();
      }
      const Vector qu = h * r * u + b[kk].transpose() * vx;
      Matrix quu = symmetrize(Matrix(h * r + b[kk].transpose() * vxx * b[kk]));
      Matrix qux = b[kk].transpose() * vxx * a[kk];
      if (const auto pin = pin_rows.find(kk); pin != pin_rows.end()) {
        const TimingRow& row = pin->second;
        qxx += kPinWeight * row.dx * row.dx.transpose();
        quu += kPinWeight * row.du * row.du.transpose();
        qux += kPinWeight * row.du * row.dx.transpose();
      }
      Matrix quu_reg = quu;
      quu_reg.diagonal().array() += reg;
      Eigen::LLT<Matrix> llt(quu_reg);
      if (llt.info() != Eigen::Success) return false;
      gains[kk] = -llt.solve(qux);
      ff[kk] = -llt.solve(qu);
      dv1 += ff[kk].dot(qu);
      const Matrix& kg = gains[kk];
      vx = qx + kg.transpose() * quu * ff[kk] + kg.transpose() * qu + qux.transpose() * ff[kk];
      vxx = symmetrize(Matrix(qxx + kg.transpose() * quu * kg + kg.transpose() * qux +
                              qux.transpose() * kg));
    }
    return true;
  };

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    if (relinearize) {
      for (std::size_t k = 0; k < n_steps; ++k) step_jacobians(system, nominal, k, a[k], b[k]);
      // An event on a grid node sits on a kink of the sampled cost; the
      // quadratic model cannot see across it, so the step keeps it in place.
      pins.clear();
      for (std::size_t e = 0; e < nominal.events.size(); ++e) {
        if (!on_node(nominal, nominal.events[e])) continue;
        if (auto row = timing_row(system, nominal, e)) pins[row->step] = std::move(*row);
      }
      relinearize = false;
    }

    double dv1 = 0.0;
    const bool ok = backward(nominal, pins, mu, dv1);
    if (!ok) {
      mu = std::max(1e-6, 10.0 * mu);
      if (mu > 1e10) throw Error(ErrorCode::kDiverged, "Q_uu not positive definite");
      continue;
    }
    // Nothing left to gain at first order.
    if (-dv1 <= 1e-14 * (1.0 + std::abs(cost))) {
      plan.converged = true;
      plan.iterations = iter;
      break;
    }

    // Forward pass with backtracking.
    const std::vector<int> visit = visit_index(nominal);
    bool accepted = false;
    for (double alpha : config.line_search) {
      std::vector<Vector> held(n_steps);
      int trial_visit = 0;
      ControlPolicy policy = [&](std::size_t k, double t, int mode, const Vector& x) -> Vector {
        if (t > nominal.times[k]) {  // after an event inside the step
          ++trial_visit;
          return held[k];
        }
        // A trial that crosses a guard earlier or later than the nominal is
        // compared against the nominal on the same side of the event.
        const Reference ref = reference_for(system, nominal, visit, k, mode, trial_visit);
        if (ref.step < 0) return Vector();
        const std::size_t jj = std::size_t(ref.step);
        const Vector dx = ref.map.size() ? Vector(ref.map * (x - ref.state)) : Vector(x - ref.state);
        held[k] = nominal.controls[jj] + alpha * ff[jj] + gains[jj] * dx;
        return held[k];
      };
      TrajectoryBundle trial;
      try {
        trial = rollout(policy);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kConfig) throw;
        continue;  // a step that leaves the event structure valid may exist at smaller alpha
      }
      const double trial_cost = trajectory_cost(system, trial, config);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        if (event_signature(trial) != event_signature(nominal)) {
          plan.warnings.push_back("event-sequence-changed at iteration " + std::to_string(iter) +
                                  "; re-linearized");
        }
        const double decrease = cost - trial_cost;
        nominal = std::move(trial);
        cost = trial_cost;
        plan.cost_history.push_back(cost);
        accepted = true;
        relinearize = true;
        mu = mu > 1e-8 ? mu / 10.0 : 0.0;
        if (decrease <= config.tolerance * std::abs(cost + decrease)) plan.converged = true;
        break;
      }
    }
    plan.iterations = iter + 1;
    if (plan.converged) break;
    if (!accepted) {
      mu = std::max(1e-6, 10.0 * mu);
      if (mu > 1e10) {
        throw Error(ErrorCode::kDiverged,
                    "no cost decrease after full backtracking at iteration " + std::to_string(iter));
      }
    }
  }

  // Final linearization and feedback along the returned trajectory. The
  // gains come from a plain pass without the timing penalties.
  for (std::size_t k = 0; k < n_steps; ++k) step_jacobians(system, nominal, k, a[k], b[k]);
  {
    double dv1 = 0.0;
    backward(nominal, {}, 0.0, dv1);
  }
  plan.trajectory = std::move(nominal);
  plan.step_a = std::move(a);
  plan.step_b = std::move(b);
  plan.gains = std::move(gains);
  plan.feedforward = std::move(ff);
  plan.cost = cost;

  // First-order check. Events that sit on a grid node are kinks of the
  // sampled problem (the held control switches there), so the gradient may
  // keep a component along each such event's timing direction.
  const auto grad = cost_gradient(system, plan.trajectory, config, plan.step_a, plan.step_b);
  Eigen::Index total = 0;
  for (const auto& g : grad) total += g.size();
  Vector g_all(total);
  for (std::size_t k = 0, off = 0; k < grad.size(); off += std::size_t(grad[k].size()), ++k) {
    g_all.segment(Eigen::Index(off), grad[k].size()) = grad[k];
  }
  plan.gradient_norm = total ? g_all.cwiseAbs().maxCoeff() : 0.0;
  std::vector<Vector> pinned;
  for (std::size_t e = 0; e < plan.trajectory.events.size(); ++e) {
    if (!on_node(plan.trajectory, plan.trajectory.events[e])) continue;
    const auto s = event_time_gradient(system, plan.trajectory, e, plan.step_a, plan.step_b);
    if (s.empty()) continue;
    Vector col(total);
    for (std::size_t k = 0, off = 0; k < s.size(); off += std::size_t(s[k].size()), ++k) {
      col.segment(Eigen::Index(off), s[k].size()) = s[k];
    }
    pinned.push_back(col);
  }
  Vector residual = g_all;
  if (!pinned.empty()) {
    Matrix sens(total, Eigen::Index(pinned.size()));
    for (std::size_t i = 0; i < pinned.size(); ++i) sens.col(Eigen::Index(i)) = pinned[i];
    residual -= sens * sens.colPivHouseholderQr().solve(g_all);
  }
  plan.stationarity = total ? residual.cwiseAbs().maxCoeff() : 0.0;
  return plan;
}

std::vector<Vector> cost_gradient(const HybridSystemSpec& system, const TrajectoryBundle& traj,
                                  const IlqrConfig& config, const std::vector<Matrix>& a,
                                  const std::vector<Matrix>& b) {
  std::vector<Vector> grad(traj.steps());
  Vector p = config.terminal_cost * (traj.states.back() - config.goal);
  for (std::size_t k = traj.steps(); k-- > 0;) {
    const ModeSpec& mode = system.mode(traj.modes[k]);
    const double h = traj.times[k + 1] - traj.times[k];
    grad[k] = h * control_weight(config, mode) * traj.controls[k] + b[k].transpose() * p;
    Vector next = a[k].transpose() * p;
    if (config.running_state_cost) next += h * mode.cost() * traj.states[k];
    p = std::move(next);
  }
  return grad;
}

std::vector<Vector> event_time_gradient(const HybridSystemSpec& system,
                                        const TrajectoryBundle& traj, std::size_t e,
                                        const std::vector<Matrix>& a,
                                        const std::vector<Matrix>& b) {
  const auto row = timing_row(system, traj, e);
  if (!row) return {};
  std::vector<Vector> out(traj.steps());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = Vector::Zero(traj.controls[j].size());
  out[row->step] = row->du;
  Vector lambda = row->dx;
  for (std::size_t j = row->step; j-- > 0;) {
    out[j] = b[j].transpose() * lambda;
    lambda = a[j].transpose() * lambda;
  }
  return out;
}

TrajectoryBundle snap_node_events(const HybridSystemSpec& system, TrajectoryBundle traj) {
  for (auto& ev : traj.events) {
    if (!on_node(traj, ev)) continue;
    const std::size_t k = ev.t_minus - traj.times[ev.step] < traj.times[ev.step + 1] - ev.t_minus
                              ? ev.step
                              : ev.step + 1;
    if (k == 0 || k >= traj.steps()) continue;
    const ModeSpec& pre = system.mode(ev.from_mode);
    const ModeSpec& post = system.mode(ev.to_mode);
    auto held = [](const Vector& u, Eigen::Index m) {
      return u.size() == m ? u : Vector(Vector::Zero(m));
    };
    ev.u_minus = held(traj.controls[k - 1], pre.input_dim);
    ev.u_plus = held(traj.controls[k], post.input_dim);
    ev.xi = saltation_matrix(pre, post, system.transitions[ev.transition], ev.t_minus, ev.x_minus,
                             ev.u_minus, ev.u_plus);
  }
  return traj;
}

HybridLinearization linearize_along(const TrajectoryBundle& input, const HybridSystemSpec& system) {
  const TrajectoryBundle traj = snap_node_events(system, input);
  HybridLinearization out;
  const double tiny = 1e-9 * (traj.times.back() - traj.times.front()) / double(traj.steps());

  struct Node {
    double t;
    Vector x, u;
  };
  int mode_id = traj.modes.front();
  std::vector<Node> nodes{{traj.times.front(), traj.states.front(), traj.controls.front()}};

  auto close_segment = [&](double t_end, const Vector& x_end, const Vector& u_end) {
    if (t_end - nodes.back().t <= 0.0) {
      throw Error(ErrorCode::kConfig, "zero-length segment at t=" + std::to_string(t_end));
    }
    nodes.push_back({t_end, x_end, u_end});
    const ModeSpec& mode = system.mode(mode_id);
    LinearSegmentd seg;
    for (const auto& nd : nodes) {
      seg.times.push_back(nd.t);
      seg.a.push_back(mode.flow_jacobian_x(nd.t, nd.x, nd.u));
      seg.b.push_back(mode.flow_jacobian_u(nd.t, nd.x, nd.u));
      seg.q.push_back(mode.cost());
    }
    seg.validate();
    out.segments.push_back(std::move(seg));
    out.modes.push_back(mode_id);
  };

  std::size_t next_event = 0;
  for (std::size_t k = 0; k < traj.steps(); ++k) {
    while (next_event < traj.events.size() && traj.events[next_event].step == k) {
      const SaltationEvent& ev = traj.events[next_event++];
      close_segment(ev.t_minus, ev.x_minus, ev.u_minus);
      out.xis.push_back(ev.xi);
      out.event_times.push_back(ev.t_minus);
      out.events.push_back(ev);
      mode_id = ev.to_mode;
      nodes = {{ev.t_plus, ev.x_plus, ev.u_plus}};
    }
    const double t_next = traj.times[k + 1];
    if (k + 1 < traj.steps() && t_next - nodes.back().t > tiny) {
      nodes.push_back({t_next, traj.states[k + 1], traj.controls[k + 1]});
    }
  }
  close_segment(traj.times.back(), traj.states.back(), traj.controls.back());
  return out;
}

}  // namespace hcs
