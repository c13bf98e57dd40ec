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

// Hybrid covariance steering for general (rectangular or singular) jump maps.
//
// Each segment's cost is the relative entropy between the controlled
// initial/terminal joint Gaussian and the one induced by the unconstrained
// LQG closed loop (the prior). With the jump constraint Sigma+ = Xi Sigma- Xi'
// substituted, the sum over segments is a smooth convex function of the
// pre-jump covariances Sigma-_j and the cross-covariances W_j, where W_j is
// the lower-left block of the joint [[Sigma_start, W'], [W, Sigma_end]].
//
// For one segment with start covariance Ss (regularized to Ss + eta I when it
// follows a jump), end covariance Se, prior transition Phi and Gramian S:
//
//   f = tr(S^-1 Se)/eps + tr(Phi'S^-1 Phi Ss)/eps - 2 tr(Phi'S^-1 W)/eps
//       - logdet(Se - W Ss^-1 W')
//
// and f = 2 KL - logdet(eps S) + n. The reported objective drops the two
// candidate-independent traces tr(Phi_1'S_1^-1 Phi_1 Sigma0)/eps and
// tr(S_K^-1 SigmaT)/eps from the sum; objective_constant() restores the gap
// to twice the summed relative entropy.
//
// This module works in double precision only.

#pragma once

#include <vector>

#include "hcs/hybrid_analytic.hpp"
#include "hcs/linalg.hpp"
#include "hcs/smooth_steering.hpp"

namespace hcs {

/// Unconstrained LQG closed loop on one segment.
struct PriorSegment {
  std::vector<double> times;
  std::vector<Matrix> pi_hat;  // Riccati schedule with zero terminal value
  Matrix phi;                  // transition of A - BB'pi_hat over the segment
  Matrix gramian;              // int Phi(tf, t) B B' Phi(tf, t)' dt

  Eigen::Index dim() const { return phi.rows(); }
};

/// Riccati sweep from zero terminal value, then a joint RK4 pass for the
/// closed-loop transition and the Gramian. Throws `gramian-singular` when
/// lambda_min(S) <= 1e-12 lambda_max(S).
PriorSegment build_prior(const LinearSegmentd& seg);

/// Prior from precomputed data (no schedules).
PriorSegment prior_from_blocks(const Matrix& phi, const Matrix& gramian);

/// [[Ss, Ss Phi'], [Phi Ss, Phi Ss Phi' + eps S]].
Matrix joint_prior_covariance(const PriorSegment& prior, const Matrix& sigma_start, double eps);

struct SdpOptions {
  // Regularization levels for rank-deficient jumps, relative to the problem's
  // covariance scale.
  std::vector<double> eta_schedule{1e-2, 1e-4, 1e-6};
  // Finish with the eta = 0 limit, started from the linear extrapolation of
  // the last two levels. Otherwise the last level is returned.
  bool extrapolate = true;
  double tolerance = 1e-9;
  int max_iterations = 200;
  double rho = 0.99;
  // Adds tr(Pi_hat_j(t0) Sigma_start_j)/eps for every segment after a jump.
  // The relative-entropy objective omits this term, so with a nonzero state
  // cost it differs from the expected control cost; enabling it makes the two
  // coincide.
  bool state_cost_coupling = false;
};

/// Chain of K segments joined by K - 1 jumps.
struct SdpProblem {
  std::vector<PriorSegment> segments;
  std::vector<Matrix> xis;
  Matrix sigma0, sigma_t;
  double epsilon = 1.0;
  SdpOptions options;

  std::size_t jump_count() const { return xis.size(); }
  /// True when some jump cannot produce a nonsingular post-jump covariance.
  bool needs_regularization() const;
  /// Scale used for eta and internal normalization.
  double covariance_scale() const;
  void validate() const;

  static SdpProblem two_segment(const Matrix& s1, const Matrix& phi1, const Matrix& s2,
                                const Matrix& phi2, const Matrix& xi, const Matrix& sigma0,
                                const Matrix& sigma_t, double eps);
};

struct SdpVariables {
  std::vector<Matrix> sigma_minus;  // one per jump
  std::vector<Matrix> w;            // one per segment
};

/// Objective at a candidate with post-jump covariances regularized by the
/// absolute `eta`. Throws `infeasible-logdet-domain` outside the domain.
double objective_eval(const SdpVariables& v, const SdpProblem& p, double eta = 0.0);

/// objective_eval + objective_constant = 2 * sum_j KL_j.
double objective_constant(const SdpProblem& p);

/// KL(N(0, p) || N(0, q)).
double gaussian_kl(const Matrix& p, const Matrix& q);

/// Sum over segments of KL(controlled joint || prior joint).
double kl_objective(const SdpVariables& v, const SdpProblem& p, double eta = 0.0);

/// The slightly contracted prior-induced candidate used to start the solver.
SdpVariables prior_variables(const SdpProblem& p, double rho, double eta = 0.0);

struct SdpLevel {
  double eta = 0.0;  // absolute
  int iterations = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;
  std::vector<Matrix> sigma_minus;
  std::vector<Matrix> w;
};

struct SdpSolution {
  std::vector<Matrix> sigma_minus;
  std::vector<Matrix> sigma_plus;
  std::vector<Matrix> w;
  // Y_j: the joint matrix for every segment but the last, the Schur slack
  // SigmaT - W_K (Sigma+ + eta I)^-1 W_K' for the last.
  std::vector<Matrix> y;
  double objective = 0.0;
  double eta = 0.0;  // absolute regularization of the reported objective
  double gradient_norm = 0.0;
  double min_domain_margin = 0.0;
  int iterations = 0;
  bool extrapolated = false;
  std::vector<SdpLevel> levels;

  SdpVariables variables() const { return {sigma_minus, w}; }
};

/// Damped Newton on the substituted objective. Rank-deficient jumps use eta
/// continuation toward the eta = 0 limit. Segments after such a jump are
/// solved in the basis [range(Xi), range(Xi)^perp], with the cross-covariance
/// columns along the complement scaled by sqrt(eta), which keeps every level
/// (and the limit) well conditioned.
SdpSolution solve_sdp(const SdpProblem& p);

/// Per-segment controllers for the optimized covariances. The first segment
/// uses the initial-value form; later segments start from a possibly singular
/// Sigma+ and use the terminal form with a backward Riccati sweep.
HybridSteeringSolutiond recover_controllers(const SdpSolution& sol,
                                            const std::vector<LinearSegmentd>& segments,
                                            const std::vector<Matrix>& xis, const Matrix& sigma0,
                                            const Matrix& sigma_t, double eps);

/// Transition of the closed loop A - BB'Pi over the segment, with Pi given
/// at the nodes (cubic Hermite in between).
Matrix closed_loop_transition(const LinearSegmentd& seg, const std::vector<Matrix>& pi);

/// E int |u|^2 dt along a solved segment, trapezoid rule (zero mean).
double control_energy(const SteeringSolutiond& sol);

}  // namespace hcs
