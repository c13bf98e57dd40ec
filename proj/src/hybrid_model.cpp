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

#include "hcs/hybrid_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace hcs {

namespace {

constexpr double kGrazingThreshold = 1e-12;
constexpr double kGuardTolerance = 1e-10;

bool on_pre_side(Crossing c, double g0, double g) {
  switch (c) {
    case Crossing::kDecreasing: return g > 0.0;
    case Crossing::kIncreasing: return g < 0.0;
    case Crossing::kEither: return (g > 0.0) == (g0 > 0.0) && g != 0.0;
  }
  return false;
}

bool triggered(Crossing c, double g0, double g1) {
  switch (c) {
    case Crossing::kDecreasing: return g0 > 0.0 && g1 <= 0.0;
    case Crossing::kIncreasing: return g0 < 0.0 && g1 >= 0.0;
    case Crossing::kEither: return g0 != 0.0 && (g1 == 0.0 || (g0 > 0.0) != (g1 > 0.0));
  }
  return false;
}

double central_difference(const std::function<double(double)>& f, double x) {
  const double h = 1e-6 * std::max(1.0, std::abs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

std::string dims(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

Matrix numeric_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                        double rel_step) {
  const Vector f0 = f(x);
  Matrix jac(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x(i)));
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    jac.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

// ---------------------------------------------------------------------------
// ModeSpec

Matrix ModeSpec::flow_jacobian_x(double t, const Vector& x, const Vector& u) const {
  if (jacobian_x) return jacobian_x(t, x, u);
  return numeric_jacobian([&](const Vector& z) { return drift(t, z, u); }, x);
}

Matrix ModeSpec::flow_jacobian_u(double t, const Vector& x, const Vector& u) const {
  if (jacobian_u) return jacobian_u(t, x, u);
  return numeric_jacobian([&](const Vector& v) { return drift(t, x, v); }, u);
}

Matrix ModeSpec::noise(double t, const Vector& x, const Vector& u) const {
  if (noise_gain) return noise_gain(t, x, u);
  return flow_jacobian_u(t, x, u);
}

Matrix ModeSpec::cost() const {
  if (state_cost.size() == 0) return Matrix::Zero(state_dim, state_dim);
  return state_cost;
}

ModeSpec ModeSpec::linear(int id, const LinearSegmentd& grid, std::string name) {
  grid.validate();
  auto g = std::make_shared<const LinearSegmentd>(grid);
  // Interval index and weight for time t, clamped to the grid.
  auto locate = [g](double t) -> std::pair<std::size_t, double> {
    const auto& ts = g->times;
    if (t <= ts.front()) return {0, 0.0};
    if (t >= ts.back()) return {ts.size() - 2, 1.0};
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - ts.begin()) - 1;
    return {k, (t - ts[k]) / (ts[k + 1] - ts[k])};
  };
  ModeSpec m;
  m.id = id;
  m.name = std::move(name);
  m.state_dim = g->state_dim();
  m.input_dim = g->input_dim();
  m.drift = [g, locate](double t, const Vector& x, const Vector& u) -> Vector {
    const auto [k, th] = locate(t);
    return g->a_at(k, th) * x + g->b_at(k, th) * u;
  };
  m.jacobian_x = [g, locate](double t, const Vector&, const Vector&) -> Matrix {
    const auto [k, th] = locate(t);
    return g->a_at(k, th);
  };
  m.jacobian_u = [g, locate](double t, const Vector&, const Vector&) -> Matrix {
    const auto [k, th] = locate(t);
    return g->b_at(k, th);
  };
  m.state_cost = g->q.front();
  return m;
}

ModeSpec ModeSpec::linear(int id, const Matrix& a, const Matrix& b, const Matrix& q,
                          std::string name) {
  if (a.rows() != a.cols() || b.rows() != a.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "linear mode A " + dims(a.rows(), a.cols()) +
                                                   ", B " + dims(b.rows(), b.cols()));
  }
  ModeSpec m;
  m.id = id;
  m.name = std::move(name);
  m.state_dim = a.rows();
  m.input_dim = b.cols();
  m.drift = [a, b](double, const Vector& x, const Vector& u) -> Vector { return a * x + b * u; };
  m.jacobian_x = [a](double, const Vector&, const Vector&) { return a; };
  m.jacobian_u = [b](double, const Vector&, const Vector&) { return b; };
  m.state_cost = q.size() == 0 ? Matrix(Matrix::Zero(a.rows(), a.rows())) : q;
  return m;
}

// ---------------------------------------------------------------------------
// TransitionSpec

Vector TransitionSpec::guard_grad_x(double t, const Vector& x) const {
  if (guard_gradient_x) return guard_gradient_x(t, x);
  Matrix j = numeric_jacobian([&](const Vector& z) { return Vector::Constant(1, guard(t, z)); }, x);
  return j.row(0).transpose();
}

double TransitionSpec::guard_grad_t(double t, const Vector& x) const {
  if (guard_dt) return guard_dt(t, x);
  return central_difference([&](double s) { return guard(s, x); }, t);
}

Matrix TransitionSpec::reset_jac_x(double t, const Vector& x) const {
  if (reset_jacobian_x) return reset_jacobian_x(t, x);
  return numeric_jacobian([&](const Vector& z) { return reset(t, z); }, x);
}

Vector TransitionSpec::reset_jac_t(double t, const Vector& x) const {
  if (reset_dt) return reset_dt(t, x);
  const double h = 1e-6 * std::max(1.0, std::abs(t));
  return (reset(t + h, x) - reset(t - h, x)) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// HybridSystemSpec

const ModeSpec& HybridSystemSpec::mode(int id) const {
  for (const auto& m : modes) {
    if (m.id == id) return m;
  }
  throw Error(ErrorCode::kConfig, "unknown mode " + std::to_string(id));
}

std::vector<const TransitionSpec*> HybridSystemSpec::transitions_from(int id) const {
  std::vector<const TransitionSpec*> out;
  for (const auto& tr : transitions) {
    if (tr.from_mode == id) out.push_back(&tr);
  }
  return out;
}

std::size_t HybridSystemSpec::step_count() const {
  return static_cast<std::size_t>(std::max(1L, std::lround(horizon / dt)));
}

void HybridSystemSpec::validate() const {
  if (modes.empty()) throw Error(ErrorCode::kConfig, "system has no modes");
  if (!(dt > 0.0) || !(horizon > 0.0)) throw Error(ErrorCode::kConfig, "dt and horizon must be > 0");
  std::set<int> ids;
  for (const auto& m : modes) {
    if (!ids.insert(m.id).second) throw Error(ErrorCode::kConfig, "duplicate mode id");
    if (m.state_dim < 1 || m.input_dim < 0 || !m.drift) {
      throw Error(ErrorCode::kConfig, "mode " + std::to_string(m.id) + " is incomplete");
    }
    const Matrix q = m.cost();
    if (q.rows() != m.state_dim || q.cols() != m.state_dim) {
      throw Error(ErrorCode::kDimensionMismatch, "state cost of mode " + std::to_string(m.id));
    }
    if ((q - q.transpose()).norm() > 1e-12 * std::max(1.0, q.norm()) ||
        (q.size() > 0 && min_eigenvalue(q) < -1e-12 * std::max(1.0, q.norm()))) {
      throw Error(ErrorCode::kConfig, "state cost of mode " + std::to_string(m.id) +
                                          " must be symmetric PSD");
    }
  }
  for (const auto& tr : transitions) {
    if (!ids.count(tr.from_mode) || !ids.count(tr.to_mode)) {
      throw Error(ErrorCode::kConfig, "transition '" + tr.name + "' references unknown mode");
    }
    if (!tr.guard || !tr.reset) {
      throw Error(ErrorCode::kConfig, "transition '" + tr.name + "' needs guard and reset");
    }
  }
  if (!ids.count(initial_mode)) throw Error(ErrorCode::kConfig, "unknown initial mode");
}

// ---------------------------------------------------------------------------
// Events

Vector rk4_step(const ModeSpec& mode, double t, const Vector& x, const Vector& u, double h) {
  const Vector k1 = mode.flow(t, x, u);
  const Vector k2 = mode.flow(t + 0.5 * h, x + 0.5 * h * k1, u);
  const Vector k3 = mode.flow(t + 0.5 * h, x + 0.5 * h * k2, u);
  const Vector k4 = mode.flow(t + h, x + h * k3, u);
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace {

// Bisection for one transition; returns the offset of the root.
std::optional<StepCrossing> bisect(const TransitionSpec& tr, double t, double h,
                                   const Vector& x_start,
                                   const std::function<Vector(double)>& state_at) {
  const double g0 = tr.guard(t, x_start);
  Vector x_end = state_at(h);
  const double g1 = tr.guard(t + h, x_end);
  if (!triggered(tr.crossing, g0, g1)) return std::nullopt;
  // Bisect down to the resolution of t; the returned root then satisfies
  // |g| <= kGuardTolerance * (1 + |g0|) with a wide margin, which keeps the
  // event time accurate enough for finite-difference checks of Xi.
  double lo = 0.0, hi = h;
  StepCrossing c;
  c.s = h;
  c.x = std::move(x_end);
  if (g1 == 0.0) return c;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    Vector xm = state_at(mid);
    const double gm = tr.guard(t + mid, xm);
    if (gm == 0.0) {
      c.s = mid;
      c.x = std::move(xm);
      return c;
    }
    if (on_pre_side(tr.crossing, g0, gm)) {
      lo = mid;
    } else {
      hi = mid;
      c.s = mid;
      c.x = std::move(xm);
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      break;
    }
  }
  if (!(std::abs(tr.guard(t + c.s, c.x)) <= kGuardTolerance * (1.0 + std::abs(g0)))) {
    throw Error(ErrorCode::kTangentialCrossing,
                "guard '" + tr.name + "' did not converge at t=" + std::to_string(t + c.s));
  }
  return c;
}

}  // namespace

std::optional<StepCrossing> locate_crossing(
    const HybridSystemSpec& system, const std::vector<const TransitionSpec*>& candidates,
    double t, double h, const Vector& x_start, const std::function<Vector(double)>& state_at) {
  std::optional<StepCrossing> best;
  for (const TransitionSpec* tr : candidates) {
    auto c = bisect(*tr, t, h, x_start, state_at);
    if (!c) continue;
    if (!best || c->s < best->s) {
      c->transition = static_cast<std::size_t>(tr - system.transitions.data());
      best = std::move(c);
    }
  }
  return best;
}

namespace {

void check_transversal(const ModeSpec& mode, const TransitionSpec& tr, double t, const Vector& x,
                       const Vector& u) {
  const double rate = tr.guard_grad_t(t, x) + tr.guard_grad_x(t, x).dot(mode.flow(t, x, u));
  if (std::abs(rate) < kGrazingThreshold) {
    throw Error(ErrorCode::kTangentialCrossing,
                "guard '" + tr.name + "' rate " + std::to_string(rate) + " at t=" +
                    std::to_string(t));
  }
}

}  // namespace

std::optional<EventLocation> detect_event(const ModeSpec& mode, const TransitionSpec& transition,
                                          const std::vector<double>& times,
                                          const std::vector<Vector>& states,
                                          const std::vector<Vector>& controls) {
  if (states.size() != times.size() || controls.size() + 1 < times.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "trajectory samples");
  }
  HybridSystemSpec scratch;
  scratch.transitions = {transition};
  const std::vector<const TransitionSpec*> cand{&scratch.transitions.front()};
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double h = times[k + 1] - times[k];
    const Vector& x = states[k];
    const Vector& u = controls[k];
    auto c = locate_crossing(scratch, cand, times[k], h, x, [&](double s) {
      return s == h ? states[k + 1] : rk4_step(mode, times[k], x, u, s);
    });
    if (c) {
      check_transversal(mode, transition, times[k] + c->s, c->x, u);
      return EventLocation{k, times[k] + c->s, c->x};
    }
  }
  return std::nullopt;
}

EventLocation require_event(const ModeSpec& mode, const TransitionSpec& transition,
                            const std::vector<double>& times, const std::vector<Vector>& states,
                            const std::vector<Vector>& controls) {
  auto ev = detect_event(mode, transition, times, states, controls);
  if (!ev) throw Error(ErrorCode::kNoCrossing, "guard '" + transition.name + "' never crosses");
  return *ev;
}

Matrix saltation_matrix(const ModeSpec& pre, const ModeSpec& post,
                        const TransitionSpec& transition, double t, const Vector& x_minus,
                        const Vector& u_minus, const Vector& u_plus) {
  const Matrix rx = transition.reset_jac_x(t, x_minus);
  const Vector rt = transition.reset_jac_t(t, x_minus);
  const Vector gx = transition.guard_grad_x(t, x_minus);
  const double gt = transition.guard_grad_t(t, x_minus);
  if (x_minus.size() != pre.state_dim || rx.rows() != post.state_dim ||
      rx.cols() != pre.state_dim || gx.size() != pre.state_dim || rt.size() != post.state_dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "reset Jacobian " + dims(rx.rows(), rx.cols()) + " for modes " +
                    std::to_string(pre.id) + " -> " + std::to_string(post.id));
  }
  const Vector f_minus = pre.flow(t, x_minus, u_minus);
  const Vector f_plus = post.flow(t, transition.reset(t, x_minus), u_plus);
  const double den = gt + gx.dot(f_minus);
  if (!(std::abs(den) >= kGrazingThreshold)) {
    throw Error(ErrorCode::kGrazing, "saltation denominator " + std::to_string(den));
  }
  return rx + (f_plus - rx * f_minus - rt) * gx.transpose() / den;
}

// ---------------------------------------------------------------------------
// Rollout

ControlPolicy schedule_policy(std::vector<Vector> controls) {
  auto sched = std::make_shared<const std::vector<Vector>>(std::move(controls));
  return [sched](std::size_t k, double, int, const Vector&) -> Vector {
    if (k >= sched->size()) return Vector();
    return (*sched)[k];
  };
}

TrajectoryBundle rollout_deterministic(const HybridSystemSpec& system, const Vector& x0,
                                       const ControlPolicy& policy) {
  const std::size_t n_steps = system.step_count();
  TrajectoryBundle out;
  out.times.reserve(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) out.times.push_back(double(k) * system.dt);

  int mode_id = system.initial_mode;
  if (x0.size() != system.mode(mode_id).state_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "initial state size");
  }
  auto control_for = [&](std::size_t k, double t, int m, const Vector& x) {
    Vector u = policy(k, t, m, x);
    const Eigen::Index need = system.mode(m).input_dim;
    if (u.size() != need) u = Vector::Zero(need);
    return u;
  };

  Vector x = x0;
  out.states.push_back(x);
  out.modes.push_back(mode_id);
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t_end = out.times[k + 1];
    double t_cur = out.times[k];
    Vector u = control_for(k, t_cur, mode_id, x);
    out.controls.push_back(u);
    while (true) {
      const ModeSpec& mode = system.mode(mode_id);
      const double h = t_end - t_cur;
      const Vector xs = x;
      const double ts = t_cur;
      auto state_at = [&](double s) { return rk4_step(mode, ts, xs, u, s); };
      auto c = locate_crossing(system, system.transitions_from(mode_id), ts, h, xs, state_at);
      if (!c) {
        x = state_at(h);
        break;
      }
      const TransitionSpec& tr = system.transitions[c->transition];
      const double t_ev = ts + c->s;
      check_transversal(mode, tr, t_ev, c->x, u);
      SaltationEvent ev;
      ev.t_minus = ev.t_plus = t_ev;
      ev.from_mode = mode_id;
      ev.to_mode = tr.to_mode;
      ev.transition = c->transition;
      ev.step = k;
      ev.x_minus = c->x;
      ev.x_plus = tr.reset(t_ev, c->x);
      ev.u_minus = u;
      ev.u_plus = control_for(k, t_ev, tr.to_mode, ev.x_plus);
      ev.xi = saltation_matrix(mode, system.mode(tr.to_mode), tr, t_ev, ev.x_minus, ev.u_minus,
                               ev.u_plus);
      ev.condition = condition_number(ev.xi);
      ev.invertible = ev.condition <= 1e8;
      out.events.push_back(ev);
      if (static_cast<int>(out.events.size()) > system.max_events) {
        throw Error(ErrorCode::kZenoGuard,
                    "more than " + std::to_string(system.max_events) + " events");
      }
      mode_id = tr.to_mode;
      x = ev.x_plus;
      u = ev.u_plus;
      t_cur = t_ev;
      if (!(t_end - t_cur > 0.0)) break;
    }
    out.states.push_back(x);
    out.modes.push_back(mode_id);
  }
  return out;
}

TrajectoryBundle rollout_deterministic(const HybridSystemSpec& system, const Vector& x0,
                                       const std::vector<Vector>& controls) {
  return rollout_deterministic(system, x0, schedule_policy(controls));
}

// ---------------------------------------------------------------------------
// Builtin systems

HybridSystemSpec bouncing_ball(const BouncingBallParams& p) {
  HybridSystemSpec sys;
  sys.name = "bouncing_ball";
  sys.dt = p.dt;
  sys.horizon = p.horizon;
  sys.params = {{"mass", p.mass},
                {"gravity", p.gravity},
                {"restitution", p.restitution},
                {"apex_transition", p.apex_transition ? 1.0 : 0.0}};
  const double m = p.mass, g = p.gravity, e = p.restitution;
  auto make_mode = [&](int id, std::string name) {
    ModeSpec mode;
    mode.id = id;
    mode.name = std::move(name);
    mode.state_dim = 2;
    mode.input_dim = 1;
    mode.drift = [m, g](double, const Vector& x, const Vector& u) {
      Vector f(2);
      f << x(1), (u(0) - m * g) / m;
      return f;
    };
    mode.jacobian_x = [](double, const Vector&, const Vector&) {
      Matrix a(2, 2);
      a << 0, 1, 0, 0;
      return a;
    };
    mode.jacobian_u = [m](double, const Vector&, const Vector&) {
      Matrix b(2, 1);
      b << 0, 1.0 / m;
      return b;
    };
    mode.state_cost = Matrix::Zero(2, 2);
    return mode;
  };

  Matrix impact_jac(2, 2);
  impact_jac << 1, 0, 0, -e;
  TransitionSpec impact;
  impact.name = "impact";
  impact.guard = [](double, const Vector& x) { return x(0); };
  impact.guard_gradient_x = [](double, const Vector&) { return Vector::Unit(2, 0); };
  impact.guard_dt = [](double, const Vector&) { return 0.0; };
  impact.reset = [impact_jac](double, const Vector& x) -> Vector { return impact_jac * x; };
  impact.reset_jacobian_x = [impact_jac](double, const Vector&) { return impact_jac; };
  impact.reset_dt = [](double, const Vector&) { return Vector::Zero(2); };

  if (!p.apex_transition) {
    sys.modes.push_back(make_mode(1, "flight"));
    impact.from_mode = impact.to_mode = 1;
    sys.transitions.push_back(impact);
    sys.initial_mode = 1;
  } else {
    sys.modes.push_back(make_mode(1, "falling"));
    sys.modes.push_back(make_mode(2, "rising"));
    impact.from_mode = 1;
    impact.to_mode = 2;
    TransitionSpec apex;
    apex.name = "apex";
    apex.from_mode = 2;
    apex.to_mode = 1;
    apex.guard = [](double, const Vector& x) { return x(1); };
    apex.guard_gradient_x = [](double, const Vector&) { return Vector::Unit(2, 1); };
    apex.guard_dt = [](double, const Vector&) { return 0.0; };
    apex.reset = [](double, const Vector& x) -> Vector { return x; };
    apex.reset_jacobian_x = [](double, const Vector&) { return Matrix::Identity(2, 2); };
    apex.reset_dt = [](double, const Vector&) { return Vector::Zero(2); };
    sys.transitions = {impact, apex};
    sys.initial_mode = 2;
  }
  sys.validate();
  return sys;
}

HybridSystemSpec slip(const SlipParams& p) {
  HybridSystemSpec sys;
  sys.name = "slip";
  sys.dt = p.dt;
  sys.horizon = p.horizon;
  sys.params = {{"mass", p.mass},          {"stiffness", p.stiffness},
                {"rest_length", p.rest_length}, {"gravity", p.gravity},
                {"toe_x", p.toe_x}};
  const double m = p.mass, k = p.stiffness, r0 = p.rest_length, g = p.gravity, toe = p.toe_x;

  auto stance_b = [m, k](const Vector& x) {
    Matrix b = Matrix::Zero(4, 2);
    b(2, 0) = m / (x(2) * x(2));
    b(3, 1) = k / m;
    return b;
  };
  ModeSpec stance;
  stance.id = 1;
  stance.name = "stance";
  stance.state_dim = 4;
  stance.input_dim = 2;
  stance.drift = [=](double, const Vector& x, const Vector& u) {
    const double th = x(0), thd = x(1), r = x(2), rd = x(3);
    Vector f(4);
    f << thd, (-2.0 * thd * rd - g * std::cos(th)) / r, rd,
        k * (r0 - r) / m - g * std::sin(th) + thd * thd * r;
    return Vector(f + stance_b(x) * u);
  };
  stance.jacobian_x = [=](double, const Vector& x, const Vector& u) {
    const double th = x(0), thd = x(1), r = x(2), rd = x(3);
    Matrix a = Matrix::Zero(4, 4);
    a(0, 1) = 1.0;
    a(1, 0) = g * std::sin(th) / r;
    a(1, 1) = -2.0 * rd / r;
    a(1, 2) = (2.0 * thd * rd + g * std::cos(th)) / (r * r);
    a(1, 3) = -2.0 * thd / r;
    a(2, 2) = -2.0 * m * u(0) / (r * r * r);
    a(2, 3) = 1.0;
    a(3, 0) = -g * std::cos(th);
    a(3, 1) = 2.0 * thd * r;
    a(3, 2) = -k / m + thd * thd;
    return a;
  };
  stance.jacobian_u = [=](double, const Vector& x, const Vector&) { return stance_b(x); };
  stance.state_cost = Matrix::Zero(4, 4);

  Matrix flight_b = Matrix::Zero(5, 3);
  flight_b(1, 0) = 1.0;
  flight_b(3, 1) = 1.0;
  flight_b(4, 2) = 1.0;
  Matrix flight_a = Matrix::Zero(5, 5);
  flight_a(0, 1) = 1.0;
  flight_a(2, 3) = 1.0;
  ModeSpec flight;
  flight.id = 2;
  flight.name = "flight";
  flight.state_dim = 5;
  flight.input_dim = 3;
  flight.drift = [=](double, const Vector& x, const Vector& u) {
    Vector f(5);
    f << x(1), 0.0, x(3), -g, 0.0;
    return Vector(f + flight_b * u);
  };
  flight.jacobian_x = [flight_a](double, const Vector&, const Vector&) { return flight_a; };
  flight.jacobian_u = [flight_b](double, const Vector&, const Vector&) { return flight_b; };
  flight.state_cost = Matrix::Zero(5, 5);

  TransitionSpec liftoff;
  liftoff.name = "liftoff";
  liftoff.from_mode = 1;
  liftoff.to_mode = 2;
  liftoff.guard = [r0](double, const Vector& x) { return r0 - x(2); };
  liftoff.guard_gradient_x = [](double, const Vector&) { return Vector(-Vector::Unit(4, 2)); };
  liftoff.guard_dt = [](double, const Vector&) { return 0.0; };
  liftoff.reset = [r0, toe](double, const Vector& x) {
    const double th = x(0), thd = x(1), r = x(2), rd = x(3);
    const double c = std::cos(th), s = std::sin(th);
    Vector y(5);
    y << toe + r0 * c, rd * c - r * thd * s, r0 * s, r0 * thd * c + rd * s, th;
    return y;
  };
  liftoff.reset_jacobian_x = [r0](double, const Vector& x) {
    const double th = x(0), thd = x(1), r = x(2), rd = x(3);
    const double c = std::cos(th), s = std::sin(th);
    Matrix j = Matrix::Zero(5, 4);
    j(0, 0) = -r0 * s;
    j(1, 0) = -rd * s - r * thd * c;
    j(1, 1) = -r * s;
    j(1, 2) = -thd * s;
    j(1, 3) = c;
    j(2, 0) = r0 * c;
    j(3, 0) = -r0 * thd * s + rd * c;
    j(3, 1) = r0 * c;
    j(3, 3) = s;
    j(4, 0) = 1.0;
    return j;
  };
  liftoff.reset_dt = [](double, const Vector&) { return Vector::Zero(5); };

  TransitionSpec touchdown;
  touchdown.name = "touchdown";
  touchdown.from_mode = 2;
  touchdown.to_mode = 1;
  touchdown.guard = [r0](double, const Vector& x) { return x(2) - r0 * std::sin(x(4)); };
  touchdown.guard_gradient_x = [r0](double, const Vector& x) {
    Vector gx = Vector::Zero(5);
    gx(2) = 1.0;
    gx(4) = -r0 * std::cos(x(4));
    return gx;
  };
  touchdown.guard_dt = [](double, const Vector&) { return 0.0; };
  touchdown.reset = [r0, toe](double, const Vector& x) {
    const double px = x(0) - toe, vx = x(1), pz = x(2), vz = x(3), th = x(4);
    Vector y(4);
    y << th, (px * vz - pz * vx) / (r0 * r0), r0, -vx * std::cos(th) + vz * std::sin(th);
    return y;
  };
  touchdown.reset_jacobian_x = [r0, toe](double, const Vector& x) {
    const double px = x(0) - toe, vx = x(1), pz = x(2), vz = x(3), th = x(4);
    Matrix j = Matrix::Zero(4, 5);
    j(0, 4) = 1.0;
    j(1, 0) = vz / (r0 * r0);
    j(1, 1) = -pz / (r0 * r0);
    j(1, 2) = -vx / (r0 * r0);
    j(1, 3) = px / (r0 * r0);
    j(3, 1) = -std::cos(th);
    j(3, 3) = std::sin(th);
    j(3, 4) = vx * std::sin(th) + vz * std::cos(th);
    return j;
  };
  touchdown.reset_dt = [](double, const Vector&) { return Vector::Zero(4); };

  sys.modes = {stance, flight};
  sys.transitions = {liftoff, touchdown};
  sys.initial_mode = 1;
  sys.validate();
  return sys;
}

}  // namespace hcs
