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

#include "hcs/sim_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <thread>

namespace hcs {

namespace {

constexpr int kBlockSize = 64;

// Node index k with times[k] <= t < times[k + 1], clamped to a valid step.
std::size_t step_at(const std::vector<double>& times, double t) {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t k = it == times.begin() ? 0 : std::size_t(it - times.begin()) - 1;
  return std::min(k, times.size() - 2);
}

// Linear interpolation in a node schedule, held outside.
Matrix interpolate(const std::vector<double>& times, const std::vector<Matrix>& values, double t) {
  if (values.size() == 1 || t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  const std::size_t k = step_at(times, t);
  const double span = times[k + 1] - times[k];
  const double w = span > 0.0 ? (t - times[k]) / span : 0.0;
  return (1.0 - w) * values[k] + w * values[k + 1];
}

Vector continue_flow(const ModeSpec& mode, double t0, Vector x, const Vector& u, double t,
                     double dt) {
  const int pieces = std::max(1, int(std::ceil(std::abs(t - t0) / dt - 1e-9)));
  const double h = (t - t0) / pieces;
  for (int i = 0; i < pieces; ++i) x = rk4_step(mode, t0 + i * h, x, u, h);
  return x;
}

int visit_mode(const TrajectoryBundle& nominal, std::size_t visit) {
  return visit == 0 ? nominal.modes.front() : nominal.events[visit - 1].to_mode;
}

// Nominal visit index at each node.
std::vector<int> node_visits(const TrajectoryBundle& nominal) {
  std::vector<int> out(nominal.times.size(), 0);
  for (const auto& ev : nominal.events) {
    for (std::size_t k = ev.step + 1; k < out.size(); ++k) ++out[k];
  }
  return out;
}

struct Accumulator {
  std::vector<int> count;
  std::vector<Vector> sum;
  std::vector<Matrix> outer;
  std::vector<long> covered;

  void reset(std::size_t records, const std::vector<Eigen::Index>& dims) {
    count.assign(records, 0);
    covered.assign(records, 0);
    sum.resize(records);
    outer.resize(records);
    for (std::size_t r = 0; r < records; ++r) {
      sum[r] = Vector::Zero(dims[r]);
      outer[r] = Matrix::Zero(dims[r], dims[r]);
    }
  }
  void merge(const Accumulator& o) {
    for (std::size_t r = 0; r < count.size(); ++r) {
      count[r] += o.count[r];
      covered[r] += o.covered[r];
      sum[r] += o.sum[r];
      outer[r] += o.outer[r];
    }
  }
};

struct SampleOutcome {
  bool escaped = false;
  std::vector<double> event_times;
  Vector terminal;
  bool terminal_in_last_visit = false;
};

}  // namespace

Matrix FeedbackSegment::at(double t) const { return interpolate(times, gain, t); }

void FeedbackPlan::validate() const {
  if (nominal.times.size() < 2) throw Error(ErrorCode::kConfig, "nominal has no steps");
  if (segments.size() != nominal.events.size() + 1) {
    throw Error(ErrorCode::kDimensionMismatch, "need one feedback segment per mode visit");
  }
  for (std::size_t v = 0; v < segments.size(); ++v) {
    const auto& seg = segments[v];
    if (seg.times.empty() || seg.times.size() != seg.gain.size()) {
      throw Error(ErrorCode::kConfig, "feedback segment " + std::to_string(v) + " is empty");
    }
    if (seg.mode != visit_mode(nominal, v)) {
      throw Error(ErrorCode::kConfig, "feedback segment " + std::to_string(v) + " mode");
    }
  }
}

void FeedbackPlan::reference(const HybridSystemSpec& system, std::size_t visit, double t,
                             Vector& x, Vector& u) const {
  const auto& ev = nominal.events;
  const ModeSpec& mode = system.mode(visit_mode(nominal, visit));
  if (visit > 0 && t < ev[visit - 1].t_plus) {
    const auto& e = ev[visit - 1];
    u = e.u_plus;
    x = continue_flow(mode, e.t_plus, e.x_plus, u, t, system.dt);
    return;
  }
  if (visit < ev.size() && t > ev[visit].t_minus) {
    const auto& e = ev[visit];
    u = e.u_minus;
    x = continue_flow(mode, e.t_minus, e.x_minus, u, t, system.dt);
    return;
  }
  if (t >= nominal.times.back()) {
    x = nominal.states.back();
    u = nominal.controls.back();
    return;
  }
  const std::size_t k = step_at(nominal.times, t);
  double t0 = nominal.times[k];
  Vector x0 = nominal.states[k];
  u = nominal.controls[k];
  if (visit > 0 && ev[visit - 1].step == k) {
    t0 = ev[visit - 1].t_plus;
    x0 = ev[visit - 1].x_plus;
    u = ev[visit - 1].u_plus;
  }
  x = t > t0 ? rk4_step(mode, t0, x0, u, t - t0) : x0;
}

FeedbackPlan steering_feedback(const TrajectoryBundle& nominal,
                               const HybridSteeringSolutiond& solution) {
  FeedbackPlan plan;
  plan.nominal = nominal;
  for (std::size_t v = 0; v < solution.segments.size(); ++v) {
    FeedbackSegment seg;
    seg.mode = v <= nominal.events.size() ? visit_mode(nominal, v) : -1;
    seg.times = solution.segments[v].times;
    seg.gain = solution.segments[v].gain;
    plan.segments.push_back(std::move(seg));
  }
  plan.validate();
  return plan;
}

FeedbackPlan ilqr_feedback(const NominalPlan& ilqr) {
  FeedbackPlan plan;
  plan.nominal = ilqr.trajectory;
  const auto& traj = plan.nominal;
  const auto visits = node_visits(traj);
  plan.segments.resize(traj.events.size() + 1);
  for (std::size_t v = 0; v < plan.segments.size(); ++v) plan.segments[v].mode = visit_mode(traj, v);
  for (std::size_t k = 0; k < traj.steps(); ++k) {
    auto& seg = plan.segments[std::size_t(visits[k])];
    seg.times.push_back(traj.times[k]);
    seg.gain.push_back(ilqr.gains[k]);
  }
  // A visit that starts and ends inside one step has no node of its own.
  for (std::size_t v = 0; v < plan.segments.size(); ++v) {
    auto& seg = plan.segments[v];
    if (!seg.times.empty()) continue;
    const auto& ev = traj.events[v - 1];
    seg.times.push_back(ev.t_plus);
    seg.gain.push_back(Matrix::Zero(ev.u_plus.size(), ev.x_plus.size()));
  }
  plan.validate();
  return plan;
}

Matrix PlannedSchedule::at(std::size_t visit, double t) const {
  if (visit >= sigma.size()) throw Error(ErrorCode::kConfig, "no planned schedule for visit");
  return interpolate(times[visit], sigma[visit], t);
}

PlannedSchedule PlannedSchedule::from(const HybridSteeringSolutiond& solution) {
  PlannedSchedule out;
  for (const auto& seg : solution.segments) {
    out.times.push_back(seg.times);
    out.sigma.push_back(seg.sigma);
  }
  return out;
}

Matrix empirical_covariance(const std::vector<Vector>& samples) {
  if (samples.size() < 2) throw Error(ErrorCode::kConfig, "need at least two samples");
  Vector mean = Vector::Zero(samples.front().size());
  for (const auto& s : samples) mean += s;
  mean /= double(samples.size());
  Matrix cov = Matrix::Zero(mean.size(), mean.size());
  for (const auto& s : samples) {
    const Vector d = s - mean;
    cov.noalias() += d * d.transpose();
  }
  return symmetrize(Matrix(cov / double(samples.size() - 1)));
}

EnsembleResult simulate_ensemble(const HybridSystemSpec& system, const FeedbackPlan& plan,
                                 const SimConfig& config) {
  plan.validate();
  if (config.samples < 1) throw Error(ErrorCode::kConfig, "sample count must be >= 1");
  if (config.thinning < 1) throw Error(ErrorCode::kConfig, "thinning must be >= 1");
  if (!(config.epsilon >= 0.0)) throw Error(ErrorCode::kConfig, "epsilon must be >= 0");
  const auto& nominal = plan.nominal;
  const Eigen::Index n0 = nominal.states.front().size();
  Matrix sigma0 = config.sigma0.size() ? config.sigma0 : Matrix::Zero(n0, n0);
  if (sigma0.rows() != n0 || sigma0.cols() != n0) {
    throw Error(ErrorCode::kDimensionMismatch, "initial covariance size");
  }
  const Matrix root0 = sqrtm_psd(sigma0);
  const std::size_t n_steps = nominal.steps();
  const auto visits = node_visits(nominal);

  // Recorded nodes.
  std::vector<std::size_t> nodes;
  for (std::size_t k = 0; k <= n_steps; k += std::size_t(config.thinning)) nodes.push_back(k);
  if (nodes.back() != n_steps) nodes.push_back(n_steps);
  std::vector<std::ptrdiff_t> record_of(n_steps + 1, -1);
  std::vector<Eigen::Index> dims;
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    record_of[nodes[r]] = std::ptrdiff_t(r);
    dims.push_back(nominal.states[nodes[r]].size());
  }
  std::vector<Matrix> tube_sd;
  if (config.tube != nullptr) {
    for (std::size_t r = 0; r < nodes.size(); ++r) {
      const Matrix s = config.tube->at(std::size_t(visits[nodes[r]]), nominal.times[nodes[r]]);
      tube_sd.push_back(s.diagonal().cwiseMax(0.0).cwiseSqrt());
    }
  }
  const double sqrt_eps = std::sqrt(config.epsilon);
  const std::size_t last_visit = nominal.events.size();

  auto run_sample = [&](int index, Accumulator& acc) {
    SampleOutcome out;
    std::seed_seq seq{std::uint32_t(config.master_seed), std::uint32_t(config.master_seed >> 32),
                      std::uint32_t(index), std::uint32_t(std::uint64_t(index) >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto gaussian = [&](Eigen::Index size) {
      Vector z(size);
      for (Eigen::Index i = 0; i < size; ++i) z(i) = normal(rng);
      return z;
    };

    Vector x = nominal.states.front() + root0 * gaussian(n0);
    std::size_t visit = 0;
    int mode_id = visit_mode(nominal, 0);
    std::vector<std::pair<std::size_t, Vector>> recorded;
    recorded.reserve(nodes.size());
    recorded.emplace_back(0, x);

    auto control = [&](double t, const Vector& state) {
      Vector xr, ur;
      plan.reference(system, visit, t, xr, ur);
      return Vector(ur + plan.segments[visit].at(t) * (state - xr));
    };

    try {
      for (std::size_t k = 0; k < n_steps; ++k) {
        double t = nominal.times[k];
        const double t_end = nominal.times[k + 1];
        const double h_full = t_end - t;
        Vector dw = std::sqrt(h_full) * gaussian(system.mode(mode_id).noise(t, x, control(t, x)).cols());
        double w_left = 1.0;  // fraction of the increment not yet used
        while (t_end - t > 0.0) {
          const ModeSpec& mode = system.mode(mode_id);
          const Vector u = control(t, x);
          const double h = t_end - t;
          const Matrix g = mode.noise(t, x, u);
          if (g.cols() != dw.size()) {
            dw = std::sqrt(h) * gaussian(g.cols());
            w_left = 1.0;
          }
          const Vector xs = x;
          const double ts = t;
          // Drift by the rollout's own RK4 step, diffusion spread linearly.
          const Vector kick = sqrt_eps * g * (w_left * dw);
          auto state_at = [&](double s) {
            return Vector(rk4_step(mode, ts, xs, u, s) + (s / h) * kick);
          };
          const Vector x_end = state_at(h);
          const auto c = locate_crossing(system, system.transitions_from(mode_id), t, h, xs,
                                         state_at);
          if (!c) {
            x = x_end;
            break;
          }
          const TransitionSpec& tr = system.transitions[c->transition];
          const double t_ev = t + c->s;
          out.event_times.push_back(t_ev);
          if (int(out.event_times.size()) > system.max_events || visit + 1 > last_visit) {
            out.escaped = true;
            return out;
          }
          x = tr.reset(t_ev, c->x);
          mode_id = tr.to_mode;
          ++visit;
          if (mode_id != visit_mode(nominal, visit)) {
            out.escaped = true;
            return out;
          }
          w_left *= (h - c->s) / h;
          t = t_ev;
        }
        if (!x.allFinite()) {
          out.escaped = true;
          return out;
        }
        if (record_of[k + 1] >= 0) recorded.emplace_back(k + 1, x);
      }
    } catch (const Error&) {
      out.escaped = true;
      return out;
    }

    // Record-by-record accumulation, only where the sample is in the
    // nominal's visit (states of other visits live in other coordinates).
    std::size_t sample_visit = 0, e = 0;
    for (const auto& [node, state] : recorded) {
      const double t = nominal.times[node];
      while (e < out.event_times.size() && out.event_times[e] <= t) {
        ++sample_visit;
        ++e;
      }
      if (int(sample_visit) != visits[node]) continue;
      const std::size_t r = std::size_t(record_of[node]);
      const Vector d = state - nominal.states[node];
      acc.count[r] += 1;
      acc.sum[r] += d;
      acc.outer[r].noalias() += d * d.transpose();
      if (!tube_sd.empty()) {
        acc.covered[r] += (d.cwiseAbs().array() <= 3.0 * tube_sd[r].array()).count();
      }
    }
    out.terminal = x;
    out.terminal_in_last_visit = visit == last_visit;
    return out;
  };

  EnsembleResult res;
  res.event_times.resize(std::size_t(config.samples));
  std::vector<SampleOutcome> outcomes(std::size_t(config.samples));
  const int blocks = (config.samples + kBlockSize - 1) / kBlockSize;

  Accumulator total;
  total.reset(nodes.size(), dims);
  std::mutex merge_mutex;
  std::map<int, Accumulator> pending;
  int next_merge = 0;
  std::atomic<int> next_block{0};

  auto worker = [&] {
    for (int b = next_block++; b < blocks; b = next_block++) {
      Accumulator acc;
      acc.reset(nodes.size(), dims);
      const int end = std::min(config.samples, (b + 1) * kBlockSize);
      for (int i = b * kBlockSize; i < end; ++i) outcomes[std::size_t(i)] = run_sample(i, acc);
      // Merge blocks strictly in order so the sums do not depend on timing.
      std::lock_guard<std::mutex> lock(merge_mutex);
      pending.emplace(b, std::move(acc));
      while (!pending.empty() && pending.begin()->first == next_merge) {
        total.merge(pending.begin()->second);
        pending.erase(pending.begin());
        ++next_merge;
      }
    }
  };
  const int threads = std::max(1, std::min(config.threads, blocks));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (std::size_t r = 0; r < nodes.size(); ++r) {
    const std::size_t node = nodes[r];
    res.times.push_back(nominal.times[node]);
    res.visit.push_back(visits[node]);
    res.count.push_back(total.count[r]);
    const double c = total.count[r];
    const Vector m = c > 0 ? Vector(total.sum[r] / c) : Vector::Zero(dims[r]);
    res.mean.push_back(nominal.states[node] + m);
    Matrix cov = Matrix::Constant(dims[r], dims[r], std::numeric_limits<double>::quiet_NaN());
    if (c >= 2) cov = symmetrize(Matrix((total.outer[r] - c * m * m.transpose()) / (c - 1.0)));
    res.covariance.push_back(cov);
    res.coverage.push_back(tube_sd.empty() || c == 0
                               ? std::numeric_limits<double>::quiet_NaN()
                               : double(total.covered[r]) / (c * double(dims[r])));
  }
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto& o = outcomes[i];
    res.event_times[i] = std::move(o.event_times);
    if (o.escaped) {
      ++res.escaped;
      continue;
    }
    if (o.terminal_in_last_visit) res.terminal_states.push_back(std::move(o.terminal));
  }
  res.terminal_nominal = nominal.states.back();
  const Eigen::Index nt = res.terminal_nominal.size();
  res.terminal_mean = Vector::Zero(nt);
  for (const auto& s : res.terminal_states) res.terminal_mean += s;
  if (!res.terminal_states.empty()) res.terminal_mean /= double(res.terminal_states.size());
  res.terminal_covariance = res.terminal_states.size() >= 2
                                ? empirical_covariance(res.terminal_states)
                                : Matrix::Zero(nt, nt);
  return res;
}

ScheduleComparison compare_schedules(const EnsembleResult& ensemble,
                                     const PlannedSchedule& planned) {
  ScheduleComparison out;
  double coverage_sum = 0.0;
  int coverage_n = 0;
  for (std::size_t r = 0; r < ensemble.times.size(); ++r) {
    if (ensemble.count[r] < 2) continue;
    const Matrix s = planned.at(std::size_t(ensemble.visit[r]), ensemble.times[r]);
    const double dev = (ensemble.covariance[r] - s).norm();
    out.times.push_back(ensemble.times[r]);
    out.deviation.push_back(dev);
    out.max_deviation = std::max(out.max_deviation, dev);
    if (std::isfinite(ensemble.coverage[r])) {
      coverage_sum += ensemble.coverage[r];
      ++coverage_n;
    }
  }
  out.coverage =
      coverage_n ? coverage_sum / coverage_n : std::numeric_limits<double>::quiet_NaN();
  const Matrix& st = planned.terminal();
  out.terminal_deviation = (ensemble.terminal_covariance - st).norm() / st.norm();
  if (!ensemble.terminal_states.empty()) {
    const Vector sd = st.diagonal().cwiseMax(0.0).cwiseSqrt();
    long inside = 0;
    for (const auto& x : ensemble.terminal_states) {
      inside += ((x - ensemble.terminal_nominal).cwiseAbs().array() <= 3.0 * sd.array()).count();
    }
    out.terminal_coverage =
        double(inside) / double(ensemble.terminal_states.size() * std::size_t(sd.size()));
  }
  return out;
}

}  // namespace hcs
