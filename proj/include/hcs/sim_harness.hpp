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

// Monte-Carlo closed-loop simulation of the hybrid SDE
//
//   dX = F(t, X, u) dt + sqrt(eps) G(t, X, u) dW,  u = u_nom + K (X - x_nom),
//
// with Euler-Maruyama steps on the nominal grid and exact resets at each
// sample's own guard crossings.

#pragma once

#include <cstdint>
#include <vector>

#include "hcs/hybrid_analytic.hpp"
#include "hcs/hybrid_model.hpp"
#include "hcs/nominal_ilqr.hpp"

namespace hcs {

/// Gain schedule for one mode visit; linear in between nodes, held outside.
struct FeedbackSegment {
  int mode = 0;
  std::vector<double> times;
  std::vector<Matrix> gain;  // m x n

  Matrix at(double t) const;
};

/// Nominal trajectory plus one feedback segment per mode visit.
struct FeedbackPlan {
  TrajectoryBundle nominal;
  std::vector<FeedbackSegment> segments;

  /// Nominal state and control of visit `visit` at time t. Outside the visit's
  /// window the nominal flow is continued through the neighbouring event.
  void reference(const HybridSystemSpec& system, std::size_t visit, double t, Vector& x,
                 Vector& u) const;
  void validate() const;
};

/// Covariance steering feedback u = u_nom - B'Pi (X - x_nom).
FeedbackPlan steering_feedback(const TrajectoryBundle& nominal,
                               const HybridSteeringSolutiond& solution);

/// The iLQR step gains, applied at every step start and after events.
FeedbackPlan ilqr_feedback(const NominalPlan& plan);

/// Planned covariance per mode visit, for tube coverage and comparisons.
struct PlannedSchedule {
  std::vector<std::vector<double>> times;
  std::vector<std::vector<Matrix>> sigma;

  Matrix at(std::size_t visit, double t) const;
  const Matrix& terminal() const { return sigma.back().back(); }

  static PlannedSchedule from(const HybridSteeringSolutiond& solution);
};

struct SimConfig {
  int samples = 1000;
  std::uint64_t master_seed = 1;
  double epsilon = 1.0;
  Matrix sigma0;     // initial covariance about the nominal x0
  int thinning = 1;  // record every `thinning` steps (the last node always)
  int threads = 1;
  // Optional planned tube: when set, 3-sigma coverage is counted per record.
  const PlannedSchedule* tube = nullptr;
};

struct EnsembleResult {
  std::vector<double> times;     // recorded nodes
  std::vector<int> visit;        // nominal mode visit at each record
  std::vector<int> count;        // samples in that visit at the record
  std::vector<Vector> mean;
  std::vector<Matrix> covariance;
  std::vector<double> coverage;  // fraction of (sample, axis) inside the tube
  std::vector<std::vector<double>> event_times;  // per sample
  std::vector<Vector> terminal_states;           // samples ending in the nominal's last visit
  Vector terminal_nominal;
  Vector terminal_mean;
  Matrix terminal_covariance;
  int escaped = 0;  // non-finite states or too many events

  double escape_rate(int samples) const { return samples ? double(escaped) / samples : 0.0; }
};

/// Runs the ensemble. Sample i draws from mt19937_64 seeded with
/// seed_seq{master_seed, i}; moments are reduced in fixed blocks of samples,
/// so the result does not depend on the thread count.
EnsembleResult simulate_ensemble(const HybridSystemSpec& system, const FeedbackPlan& plan,
                                 const SimConfig& config);

/// Unbiased sample covariance. Needs at least two samples.
Matrix empirical_covariance(const std::vector<Vector>& samples);

struct ScheduleComparison {
  std::vector<double> times;
  std::vector<double> deviation;  // ||Sigma_hat - Sigma||_F per record
  double max_deviation = 0.0;
  double terminal_deviation = 0.0;  // ||Sigma_hat_T - Sigma_T||_F / ||Sigma_T||_F
  double coverage = 0.0;            // mean tube coverage (NaN without a tube)
  double terminal_coverage = 0.0;   // per-axis 3-sigma coverage at the final time
};

ScheduleComparison compare_schedules(const EnsembleResult& ensemble,
                                     const PlannedSchedule& planned);

}  // namespace hcs
