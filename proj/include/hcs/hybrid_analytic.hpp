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

// Closed-form hybrid covariance steering for invertible saltation matrices.
//
// A jump X+ = Xi X- acts on the Hamiltonian variables as blockdiag(Xi, Xi^-T),
// which preserves the symplectic identities. Chaining segment kernels and jump
// kernels therefore gives a single kernel over [0, T], and the smooth closed
// form applies unchanged with that kernel.

#pragma once

#include <vector>

#include "hcs/smooth_steering.hpp"

namespace hcs {

template <typename Scalar>
struct HybridKernel {
  std::vector<KernelBlocks<Scalar>> segment_kernels;
  std::vector<KernelBlocks<Scalar>> jump_kernels;
  KernelBlocks<Scalar> composed;
};

/// Condition-number gate for the analytic path.
inline constexpr double kMaxSaltationCondition = 1e8;

template <typename Scalar>
bool saltation_invertible(const MatrixX<Scalar>& xi) {
  return xi.rows() == xi.cols() && condition_number(xi) <= Scalar(kMaxSaltationCondition);
}

/// blockdiag(Xi, Xi^-T). Throws `noninvertible-saltation` for rectangular or
/// ill-conditioned Xi.
template <typename Scalar>
KernelBlocks<Scalar> jump_kernel(const MatrixX<Scalar>& xi, Scalar t_event = Scalar(0)) {
  if (!saltation_invertible(xi)) {
    throw Error(ErrorCode::kNoninvertibleSaltation,
                "saltation matrix " + std::to_string(xi.rows()) + "x" +
                    std::to_string(xi.cols()) + " is not invertible; use the sdp method");
  }
  const Eigen::Index n = xi.rows();
  KernelBlocks<Scalar> k;
  k.phi11 = xi;
  k.phi12 = MatrixX<Scalar>::Zero(n, n);
  k.phi21 = MatrixX<Scalar>::Zero(n, n);
  k.phi22 = xi.transpose().partialPivLu().inverse();
  k.t_from = t_event;
  k.t_to = t_event;
  return k;
}

/// Phi^H(T, 0) = Phi_K ... Phi^Xi_1 Phi_1.
template <typename Scalar>
HybridKernel<Scalar> compose_hybrid_kernel(std::vector<KernelBlocks<Scalar>> segments,
                                           std::vector<KernelBlocks<Scalar>> jumps,
                                           Scalar residual_tol = Scalar(1e-8)) {
  if (segments.empty() || jumps.size() + 1 != segments.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "need one jump between consecutive segments");
  }
  MatrixX<Scalar> acc = segments.front().full();
  for (std::size_t j = 0; j < jumps.size(); ++j) {
    if (jumps[j].full().cols() != acc.rows() ||
        segments[j + 1].full().cols() != jumps[j].full().rows()) {
      throw Error(ErrorCode::kDimensionMismatch, "kernel chain dimensions");
    }
    acc = segments[j + 1].full() * jumps[j].full() * acc;
  }
  const Eigen::Index n_out = segments.back().dim();
  const Eigen::Index n_in = segments.front().phi11.cols();
  HybridKernel<Scalar> hk;
  hk.composed = KernelBlocks<Scalar>::from_full(acc, n_out, n_in);
  hk.composed.t_from = segments.front().t_from;
  hk.composed.t_to = segments.back().t_to;
  hk.segment_kernels = std::move(segments);
  hk.jump_kernels = std::move(jumps);
  const Scalar res = max_symplectic_residual(hk.composed);
  if (!(res <= residual_tol)) {
    throw Error(ErrorCode::kIdentityResidualExceeded, std::to_string(double(res)));
  }
  return hk;
}

template <typename Scalar>
HybridKernel<Scalar> build_hybrid_kernel(const std::vector<LinearSegment<Scalar>>& segments,
                                         const std::vector<MatrixX<Scalar>>& xis) {
  std::vector<KernelBlocks<Scalar>> seg_k;
  std::vector<KernelBlocks<Scalar>> jump_k;
  for (const auto& s : segments) seg_k.push_back(hamiltonian_kernel(s));
  for (std::size_t j = 0; j < xis.size(); ++j) {
    jump_k.push_back(jump_kernel<Scalar>(xis[j], segments[j].tf()));
  }
  return compose_hybrid_kernel(std::move(seg_k), std::move(jump_k));
}

/// Pi_1(0), H_1(0) from the composed kernel (the eps-explicit closed form).
template <typename Scalar>
BoundaryValues<Scalar> solve_hybrid_cs(const MatrixX<Scalar>& sigma0,
                                       const MatrixX<Scalar>& sigma_t,
                                       const HybridKernel<Scalar>& hk, Scalar eps) {
  return solve_smooth_cs(sigma0, sigma_t, hk.composed, eps);
}

template <typename Scalar>
struct JumpRecord {
  Scalar time{0};
  MatrixX<Scalar> xi;
  MatrixX<Scalar> sigma_minus, sigma_plus;
  MatrixX<Scalar> pi_minus, pi_plus;
};

template <typename Scalar>
struct HybridSteeringSolution {
  std::vector<SteeringSolution<Scalar>> segments;
  std::vector<JumpRecord<Scalar>> jumps;
  /// Expected cost E sum_j int |u|^2 + X'QX.
  Scalar cost{0};

  const MatrixX<Scalar>& sigma_minus() const { return jumps.front().sigma_minus; }
  const MatrixX<Scalar>& sigma_plus() const { return jumps.front().sigma_plus; }
  const MatrixX<Scalar>& terminal_sigma() const { return segments.back().sigma.back(); }
};

/// Residual ||Xi' Pi+ Xi - Pi-|| / max(1, ||Pi-||) of the discrete Riccati
/// condition at a jump.
template <typename Scalar>
Scalar pi_jump_residual(const JumpRecord<Scalar>& j) {
  return (j.xi.transpose() * j.pi_plus * j.xi - j.pi_minus).norm() /
         std::max<Scalar>(Scalar(1), j.pi_minus.norm());
}

/// Cost at the jump, E[X+'Pi+X+] - E[X-'Pi-X-] for zero-mean deviations.
template <typename Scalar>
Scalar jump_cost(const JumpRecord<Scalar>& j) {
  return (j.pi_plus * j.sigma_plus).trace() - (j.pi_minus * j.sigma_minus).trace();
}

/// Integrates Pi, H, Sigma through every segment, applying
///   Pi+ = Xi^-T Pi- Xi^-1,  H+ = Xi^-T H- Xi^-1,  Sigma+ = Xi Sigma- Xi'
/// at each jump.
template <typename Scalar>
HybridSteeringSolution<Scalar> propagate_hybrid_plan(
    const BoundaryValues<Scalar>& bv, const std::vector<LinearSegment<Scalar>>& segments,
    const std::vector<MatrixX<Scalar>>& xis, const MatrixX<Scalar>& sigma0,
    const MatrixX<Scalar>& sigma_t, Scalar eps) {
  if (xis.size() + 1 != segments.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "need one jump between consecutive segments");
  }
  HybridSteeringSolution<Scalar> out;
  MatrixX<Scalar> pi = bv.pi;
  MatrixX<Scalar> h = bv.h;
  MatrixX<Scalar> sigma = sigma0;
  for (std::size_t j = 0; j < segments.size(); ++j) {
    auto sol = propagate_segment(segments[j], sigma, pi, &h, eps);
    out.cost += segment_cost(sol, segments[j]);
    if (j + 1 < segments.size()) {
      const MatrixX<Scalar>& xi = xis[j];
      if (!saltation_invertible(xi)) {
        throw Error(ErrorCode::kNoninvertibleSaltation, "jump " + std::to_string(j));
      }
      const MatrixX<Scalar> xi_inv = xi.partialPivLu().inverse();
      JumpRecord<Scalar> rec;
      rec.time = segments[j].tf();
      rec.xi = xi;
      rec.sigma_minus = sol.sigma.back();
      rec.pi_minus = sol.pi.back();
      rec.sigma_plus = symmetrize(MatrixX<Scalar>(xi * rec.sigma_minus * xi.transpose()));
      rec.pi_plus = symmetrize(MatrixX<Scalar>(xi_inv.transpose() * rec.pi_minus * xi_inv));
      pi = rec.pi_plus;
      h = symmetrize(MatrixX<Scalar>(xi_inv.transpose() * sol.h.back() * xi_inv));
      sigma = rec.sigma_plus;
      sol.sigma_t = rec.sigma_minus;
      out.jumps.push_back(std::move(rec));
    } else {
      sol.sigma_t = sigma_t;
    }
    out.segments.push_back(std::move(sol));
  }
  return out;
}

/// Kernel, boundary values and schedules in one call.
template <typename Scalar>
HybridSteeringSolution<Scalar> solve_hybrid_analytic(
    const std::vector<LinearSegment<Scalar>>& segments, const std::vector<MatrixX<Scalar>>& xis,
    const MatrixX<Scalar>& sigma0, const MatrixX<Scalar>& sigma_t, Scalar eps) {
  const auto hk = build_hybrid_kernel(segments, xis);
  const auto bv = solve_hybrid_cs(sigma0, sigma_t, hk, eps);
  return propagate_hybrid_plan(bv, segments, xis, sigma0, sigma_t, eps);
}

/// Phi^H(t, 0) at every node, with both the pre- and post-jump kernels at
/// each event time.
template <typename Scalar>
std::vector<std::pair<Scalar, MatrixX<Scalar>>> hybrid_kernel_path(
    const std::vector<LinearSegment<Scalar>>& segments, const std::vector<MatrixX<Scalar>>& xis) {
  std::vector<std::pair<Scalar, MatrixX<Scalar>>> out;
  MatrixX<Scalar> acc;
  for (std::size_t j = 0; j < segments.size(); ++j) {
    auto path = hamiltonian_kernel_path(segments[j]);
    const bool first = j == 0;
    for (std::size_t k = 0; k < path.size(); ++k) {
      if (!first && k == 0) continue;
      out.emplace_back(segments[j].times[k], first ? path[k] : MatrixX<Scalar>(path[k] * acc));
    }
    if (j + 1 < segments.size()) {
      acc = jump_kernel<Scalar>(xis[j]).full() * out.back().second;
      out.emplace_back(segments[j].tf(), acc);
    }
  }
  return out;
}

using HybridSteeringSolutiond = HybridSteeringSolution<double>;

}  // namespace hcs
