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

// Single-mode covariance steering on a finite horizon.
//
// The system is dX = A X dt + B (u dt + sqrt(eps) dW) with running cost
// E int |u|^2 + X'QX. The optimal policy is u = -B' Pi X where Pi solves the
// control Riccati equation, and the boundary covariances couple Pi with a
// second Riccati variable H through
//
//   eps * Sigma(0)^-1 = Pi(0) + H(0),   eps * Sigma(T)^-1 = Pi(T) + H(T).
//
// Both Riccati flows are linear in the Hamiltonian variables [X; Y] with
// generator M = [[A, -BB'], [-Q, -A']], so the boundary-value problem has a
// closed form in the blocks of the transition kernel of M.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "hcs/linalg.hpp"

namespace hcs {

/// Time-gridded linear flow (A, B, Q at the nodes, linearly interpolated in
/// between). Node spacing is usually uniform; the last interval of a segment
/// that ends at an event time may be shorter.
template <typename Scalar>
struct LinearSegment {
  std::vector<Scalar> times;
  std::vector<MatrixX<Scalar>> a;
  std::vector<MatrixX<Scalar>> b;
  std::vector<MatrixX<Scalar>> q;

  Eigen::Index state_dim() const { return a.front().rows(); }
  Eigen::Index input_dim() const { return b.front().cols(); }
  std::size_t node_count() const { return times.size(); }
  Scalar t0() const { return times.front(); }
  Scalar tf() const { return times.back(); }

  // theta in [0, 1] between node k and k + 1.
  MatrixX<Scalar> a_at(std::size_t k, Scalar theta) const { return lerp(a, k, theta); }
  MatrixX<Scalar> b_at(std::size_t k, Scalar theta) const { return lerp(b, k, theta); }
  MatrixX<Scalar> q_at(std::size_t k, Scalar theta) const { return lerp(q, k, theta); }

  /// Constant matrices on [t0, tf] with step dt (last step shortened).
  static LinearSegment constant(const MatrixX<Scalar>& a_mat, const MatrixX<Scalar>& b_mat,
                                const MatrixX<Scalar>& q_mat, Scalar t0, Scalar tf,
                                Scalar dt) {
    LinearSegment seg;
    const auto steps = static_cast<std::size_t>(std::ceil((tf - t0) / dt - Scalar(1e-9)));
    for (std::size_t k = 0; k <= steps; ++k) {
      seg.times.push_back(k == steps ? tf : t0 + Scalar(k) * dt);
      seg.a.push_back(a_mat);
      seg.b.push_back(b_mat);
      seg.q.push_back(q_mat);
    }
    seg.validate();
    return seg;
  }

  void validate() const {
    const std::size_t n = times.size();
    if (n < 2 || a.size() != n || b.size() != n || q.size() != n) {
      throw Error(ErrorCode::kDimensionMismatch, "segment grids must share >= 2 nodes");
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (k + 1 < n && !(times[k + 1] > times[k])) {
        throw Error(ErrorCode::kDimensionMismatch, "segment times must increase");
      }
      if (a[k].rows() != a[k].cols() || a[k].rows() != state_dim() ||
          b[k].rows() != state_dim() || b[k].cols() != input_dim() ||
          q[k].rows() != state_dim() || q[k].cols() != state_dim()) {
        throw Error(ErrorCode::kDimensionMismatch, "segment matrix shapes");
      }
    }
  }

 private:
  static MatrixX<Scalar> lerp(const std::vector<MatrixX<Scalar>>& grid, std::size_t k,
                              Scalar theta) {
    if (theta == Scalar(0)) return grid[k];
    if (theta == Scalar(1)) return grid[k + 1];
    return (Scalar(1) - theta) * grid[k] + theta * grid[k + 1];
  }
};

enum class Direction { kForward, kReverse };

/// 2n x 2n transition kernel of the Hamiltonian system, stored by blocks.
/// kForward holds Phi(t_to, t_from); kReverse holds Psi = Phi(t_from, t_to)
/// with t_from < t_to in both cases.
template <typename Scalar>
struct KernelBlocks {
  MatrixX<Scalar> phi11, phi12, phi21, phi22;
  Scalar t_from{0};
  Scalar t_to{0};
  Direction direction{Direction::kForward};

  Eigen::Index dim() const { return phi11.rows(); }

  MatrixX<Scalar> full() const {
    const Eigen::Index n = phi11.rows();
    const Eigen::Index m = phi11.cols();
    MatrixX<Scalar> out(2 * n, 2 * m);
    out << phi11, phi12, phi21, phi22;
    return out;
  }

  static KernelBlocks from_full(const MatrixX<Scalar>& phi, Eigen::Index n_out,
                                Eigen::Index n_in) {
    KernelBlocks k;
    k.phi11 = phi.topLeftCorner(n_out, n_in);
    k.phi12 = phi.topRightCorner(n_out, n_in);
    k.phi21 = phi.bottomLeftCorner(n_out, n_in);
    k.phi22 = phi.bottomRightCorner(n_out, n_in);
    return k;
  }

  static KernelBlocks identity(Eigen::Index n, Scalar t) {
    KernelBlocks k;
    k.phi11 = MatrixX<Scalar>::Identity(n, n);
    k.phi12 = MatrixX<Scalar>::Zero(n, n);
    k.phi21 = MatrixX<Scalar>::Zero(n, n);
    k.phi22 = MatrixX<Scalar>::Identity(n, n);
    k.t_from = t;
    k.t_to = t;
    return k;
  }

  /// Psi = Phi^-1, computed by LU on the assembled matrix.
  KernelBlocks reversed() const {
    KernelBlocks r = from_full(full().partialPivLu().inverse(), phi11.cols(), phi11.rows());
    r.t_from = t_from;
    r.t_to = t_to;
    r.direction = direction == Direction::kForward ? Direction::kReverse : Direction::kForward;
    return r;
  }
};

/// The six block identities satisfied by any Hamiltonian transition kernel,
/// as relative Frobenius residuals:
///   (a) P11'P22 - P21'P12 = I      (b) P12'P22 - P22'P12 = 0
///   (c) P21'P11 - P11'P21 = 0      (d) P11 P22' - P12 P21' = I
///   (e) P12 P11' - P11 P12' = 0    (f) P21 P22' - P22 P21' = 0
template <typename Scalar>
std::array<Scalar, 6> symplectic_residuals(const KernelBlocks<Scalar>& k) {
  const auto& p11 = k.phi11;
  const auto& p12 = k.phi12;
  const auto& p21 = k.phi21;
  const auto& p22 = k.phi22;
  auto rel = [](const MatrixX<Scalar>& lhs1, const MatrixX<Scalar>& lhs2, bool eye) {
    MatrixX<Scalar> diff = lhs1 - lhs2;
    if (eye) diff -= MatrixX<Scalar>::Identity(diff.rows(), diff.cols());
    const Scalar scale = std::max<Scalar>(Scalar(1), lhs1.norm() + lhs2.norm());
    return diff.norm() / scale;
  };
  return {rel(p11.transpose() * p22, p21.transpose() * p12, true),
          rel(p12.transpose() * p22, p22.transpose() * p12, false),
          rel(p21.transpose() * p11, p11.transpose() * p21, false),
          rel(p11 * p22.transpose(), p12 * p21.transpose(), true),
          rel(p12 * p11.transpose(), p11 * p12.transpose(), false),
          rel(p21 * p22.transpose(), p22 * p21.transpose(), false)};
}

template <typename Scalar>
Scalar max_symplectic_residual(const KernelBlocks<Scalar>& k) {
  Scalar worst(0);
  for (Scalar r : symplectic_residuals(k)) worst = std::max(worst, r);
  return worst;
}

namespace detail {

template <typename Scalar>
MatrixX<Scalar> hamiltonian(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b,
                            const MatrixX<Scalar>& q) {
  const Eigen::Index n = a.rows();
  MatrixX<Scalar> m(2 * n, 2 * n);
  m << a, -b * b.transpose(), -q, -a.transpose();
  return m;
}

template <typename Scalar>
MatrixX<Scalar> hamiltonian_at(const LinearSegment<Scalar>& seg, std::size_t k, Scalar theta) {
  return hamiltonian<Scalar>(seg.a_at(k, theta), seg.b_at(k, theta), seg.q_at(k, theta));
}

/// One classical RK4 step of Y' = f(k, theta, Y) over [t_k, t_{k+1}] when
/// `forward`, or from t_{k+1} back to t_k otherwise.
template <typename Scalar, typename F>
MatrixX<Scalar> rk4_step(const F& f, std::size_t k, Scalar h, const MatrixX<Scalar>& y,
                         bool forward) {
  const Scalar s = forward ? h : -h;
  const Scalar th0 = forward ? Scalar(0) : Scalar(1);
  const Scalar th1 = forward ? Scalar(1) : Scalar(0);
  const Scalar half(0.5);
  MatrixX<Scalar> k1 = f(k, th0, y);
  MatrixX<Scalar> k2 = f(k, half, MatrixX<Scalar>(y + half * s * k1));
  MatrixX<Scalar> k3 = f(k, half, MatrixX<Scalar>(y + half * s * k2));
  MatrixX<Scalar> k4 = f(k, th1, MatrixX<Scalar>(y + s * k3));
  return y + (s / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
}

/// RK4 over [t_k, t_{k+1}] split into `pieces` equal substeps. Fast
/// closed-loop sweeps need this on grids sized for the open-loop dynamics.
template <typename Scalar, typename F>
MatrixX<Scalar> rk4_substeps(const F& f, std::size_t k, Scalar h, const MatrixX<Scalar>& y,
                             bool forward, int pieces) {
  if (pieces <= 1) return rk4_step<Scalar>(f, k, h, y, forward);
  const Scalar w = Scalar(1) / Scalar(pieces);
  const Scalar s = (forward ? h : -h) * w;
  const Scalar half(0.5);
  MatrixX<Scalar> out = y;
  for (int i = 0; i < pieces; ++i) {
    const Scalar th0 = forward ? Scalar(i) * w : Scalar(1) - Scalar(i) * w;
    const Scalar th1 = forward ? Scalar(i + 1) * w : Scalar(1) - Scalar(i + 1) * w;
    const Scalar thm = half * (th0 + th1);
    MatrixX<Scalar> k1 = f(k, th0, out);
    MatrixX<Scalar> k2 = f(k, thm, MatrixX<Scalar>(out + half * s * k1));
    MatrixX<Scalar> k3 = f(k, thm, MatrixX<Scalar>(out + half * s * k2));
    MatrixX<Scalar> k4 = f(k, th1, MatrixX<Scalar>(out + s * k3));
    out += (s / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
  }
  return out;
}

/// Substeps so that h times the closed-loop rate bound |A| + |B|^2 |X|
/// stays below 0.01.
template <typename Scalar>
int closed_loop_pieces(const LinearSegment<Scalar>& seg, std::size_t k, const MatrixX<Scalar>& x) {
  using std::ceil;
  const Scalar h = seg.times[k + 1] - seg.times[k];
  const Scalar rate = std::max(seg.a[k].norm(), seg.a[k + 1].norm()) +
                      std::max(seg.b[k].squaredNorm(), seg.b[k + 1].squaredNorm()) * x.norm();
  const Scalar pieces = ceil(h * rate / Scalar(0.01));
  return pieces < Scalar(2) ? 1 : pieces > Scalar(256) ? 256 : int(pieces);
}

template <typename Scalar>
MatrixX<Scalar> pi_rate(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b,
                        const MatrixX<Scalar>& q, const MatrixX<Scalar>& pi) {
  MatrixX<Scalar> pb = pi * b;
  return -(a.transpose() * pi + pi * a - pb * pb.transpose() + q);
}

template <typename Scalar>
MatrixX<Scalar> h_rate(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b,
                       const MatrixX<Scalar>& q, const MatrixX<Scalar>& h) {
  MatrixX<Scalar> hb = h * b;
  return -(a.transpose() * h + h * a + hb * hb.transpose() - q);
}

template <typename Scalar>
MatrixX<Scalar> sigma_rate(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b,
                           const MatrixX<Scalar>& pi, const MatrixX<Scalar>& sigma,
                           Scalar eps) {
  MatrixX<Scalar> acl = a - b * b.transpose() * pi;
  return acl * sigma + sigma * acl.transpose() + eps * b * b.transpose();
}

}  // namespace detail

/// Kernel Phi(t_k, t0) at every node of the segment (RK4, Phi(t0, t0) = I).
template <typename Scalar>
std::vector<MatrixX<Scalar>> hamiltonian_kernel_path(const LinearSegment<Scalar>& seg) {
  seg.validate();
  const Eigen::Index n2 = 2 * seg.state_dim();
  auto rhs = [&seg](std::size_t k, Scalar th, const MatrixX<Scalar>& y) -> MatrixX<Scalar> {
    return detail::hamiltonian_at(seg, k, th) * y;
  };
  std::vector<MatrixX<Scalar>> path;
  path.reserve(seg.node_count());
  path.push_back(MatrixX<Scalar>::Identity(n2, n2));
  for (std::size_t k = 0; k + 1 < seg.node_count(); ++k) {
    path.push_back(detail::rk4_step<Scalar>(rhs, k, seg.times[k + 1] - seg.times[k],
                                            path.back(), true));
  }
  return path;
}

/// Phi(tf, t0) for the segment. Throws `ill-conditioned-kernel` when the
/// symplectic identities fail by more than `residual_tol` (grid too coarse).
template <typename Scalar>
KernelBlocks<Scalar> hamiltonian_kernel(const LinearSegment<Scalar>& seg,
                                        Scalar residual_tol = Scalar(1e-6)) {
  const Eigen::Index n = seg.state_dim();
  auto path = hamiltonian_kernel_path(seg);
  auto blocks = KernelBlocks<Scalar>::from_full(path.back(), n, n);
  blocks.t_from = seg.t0();
  blocks.t_to = seg.tf();
  blocks.direction = Direction::kForward;
  const Scalar res = max_symplectic_residual(blocks);
  if (!(res <= residual_tol)) {
    throw Error(ErrorCode::kIllConditionedKernel, "symplectic residual " + std::to_string(double(res)));
  }
  return blocks;
}

template <typename Scalar>
struct BoundaryValues {
  MatrixX<Scalar> pi;
  MatrixX<Scalar> h;
};

namespace detail {

// Shared closed form: returns
//   eps S^-1 / 2 - P12^-1 P11 + sign * S^-1/2 (eps^2/4 I + S^1/2 P12^-1 R P12^-T S^1/2)^1/2 S^-1/2
template <typename Scalar>
MatrixX<Scalar> coupled_riccati_root(const MatrixX<Scalar>& sigma_here,
                                     const MatrixX<Scalar>& sigma_there,
                                     const MatrixX<Scalar>& p11, const MatrixX<Scalar>& p12,
                                     Scalar eps, Scalar sign, ErrorCode singular_code) {
  const Eigen::Index n = sigma_here.rows();
  Eigen::FullPivLU<MatrixX<Scalar>> lu(p12);
  if (!lu.isInvertible() || condition_number(p12) > Scalar(1e14)) {
    throw Error(singular_code, "off-diagonal kernel block is singular");
  }
  MatrixX<Scalar> p12_inv = lu.inverse();
  MatrixX<Scalar> s_half = sqrtm_psd(sigma_here);
  MatrixX<Scalar> s_inv_half = inv_sqrtm_pd(sigma_here);
  MatrixX<Scalar> s_inv = s_inv_half * s_inv_half;
  MatrixX<Scalar> inner = (eps * eps / Scalar(4)) * MatrixX<Scalar>::Identity(n, n) +
                          s_half * p12_inv * sigma_there * p12_inv.transpose() * s_half;
  MatrixX<Scalar> root = sqrtm_psd(inner);
  MatrixX<Scalar> out = (eps / Scalar(2)) * s_inv - p12_inv * p11 +
                        sign * (s_inv_half * root * s_inv_half);
  return symmetrize(out);
}

}  // namespace detail

/// Initial values Pi(0), H(0) of the coupled Riccati pair that steer
/// Sigma0 to SigmaT over the kernel's horizon.
template <typename Scalar>
BoundaryValues<Scalar> solve_smooth_cs(const MatrixX<Scalar>& sigma0,
                                       const MatrixX<Scalar>& sigma_t,
                                       const KernelBlocks<Scalar>& kernel, Scalar eps) {
  if (!is_positive_definite(sigma0) || !is_positive_definite(sigma_t)) {
    throw Error(ErrorCode::kPsdViolation, "boundary covariances must be positive definite");
  }
  BoundaryValues<Scalar> out;
  out.pi = detail::coupled_riccati_root<Scalar>(sigma0, sigma_t, kernel.phi11, kernel.phi12,
                                                eps, Scalar(-1), ErrorCode::kSingularPhi12);
  MatrixX<Scalar> s0_inv = symmetrize(MatrixX<Scalar>(sigma0.llt().solve(
      MatrixX<Scalar>::Identity(sigma0.rows(), sigma0.cols()))));
  out.h = symmetrize(MatrixX<Scalar>(eps * s0_inv - out.pi));
  return out;
}

/// Terminal value Pi(T) from the reverse kernel. Sigma0 may be singular,
/// which is the reason this form exists.
template <typename Scalar>
MatrixX<Scalar> terminal_pi(const MatrixX<Scalar>& sigma0, const MatrixX<Scalar>& sigma_t,
                            const KernelBlocks<Scalar>& kernel, Scalar eps) {
  if (!is_positive_definite(sigma_t)) {
    throw Error(ErrorCode::kPsdViolation, "terminal covariance must be positive definite");
  }
  const KernelBlocks<Scalar> psi =
      kernel.direction == Direction::kReverse ? kernel : kernel.reversed();
  return detail::coupled_riccati_root<Scalar>(sigma_t, sigma0, psi.phi11, psi.phi12, eps,
                                              Scalar(1), ErrorCode::kSingularPsi12);
}

/// Riccati schedule Pi(t_k) from a boundary value at t0 (kForward) or at
/// tf (kReverse). Symmetrized every step.
template <typename Scalar>
std::vector<MatrixX<Scalar>> riccati_integrate(const MatrixX<Scalar>& boundary,
                                               const LinearSegment<Scalar>& seg,
                                               Direction direction,
                                               Scalar blowup = Scalar(1e12)) {
  seg.validate();
  auto rhs = [&seg](std::size_t k, Scalar th, const MatrixX<Scalar>& pi) -> MatrixX<Scalar> {
    return detail::pi_rate<Scalar>(seg.a_at(k, th), seg.b_at(k, th), seg.q_at(k, th), pi);
  };
  const std::size_t n = seg.node_count();
  std::vector<MatrixX<Scalar>> out(n);
  const bool fwd = direction == Direction::kForward;
  out[fwd ? 0 : n - 1] = symmetrize(boundary);
  for (std::size_t s = 0; s + 1 < n; ++s) {
    const std::size_t k = fwd ? s : n - 2 - s;
    const std::size_t from = fwd ? k : k + 1;
    const std::size_t to = fwd ? k + 1 : k;
    out[to] = symmetrize(detail::rk4_substeps<Scalar>(rhs, k, seg.times[k + 1] - seg.times[k],
                                                      out[from], fwd,
                                                      detail::closed_loop_pieces(seg, k, out[from])));
    if (!(out[to].norm() <= blowup)) {
      throw Error(ErrorCode::kRiccatiBlowup, "at t=" + std::to_string(double(seg.times[to])));
    }
  }
  return out;
}

/// Forward schedule of the H Riccati equation
///   -dH/dt = A'H + HA + HBB'H - Q.
template <typename Scalar>
std::vector<MatrixX<Scalar>> h_riccati_integrate(const MatrixX<Scalar>& h0,
                                                 const LinearSegment<Scalar>& seg,
                                                 Scalar blowup = Scalar(1e12)) {
  auto rhs = [&seg](std::size_t k, Scalar th, const MatrixX<Scalar>& h) -> MatrixX<Scalar> {
    return detail::h_rate<Scalar>(seg.a_at(k, th), seg.b_at(k, th), seg.q_at(k, th), h);
  };
  std::vector<MatrixX<Scalar>> out;
  out.reserve(seg.node_count());
  out.push_back(symmetrize(h0));
  for (std::size_t k = 0; k + 1 < seg.node_count(); ++k) {
    const int pieces = detail::closed_loop_pieces(seg, k, out.back());
    out.push_back(symmetrize(detail::rk4_substeps<Scalar>(
        rhs, k, seg.times[k + 1] - seg.times[k], out.back(), true, pieces)));
    if (!(out.back().norm() <= blowup)) {
      throw Error(ErrorCode::kRiccatiBlowup, "H schedule");
    }
  }
  return out;
}

/// Closed-loop covariance under u = -B'Pi X:
///   dSigma/dt = (A - BB'Pi) Sigma + Sigma (A - BB'Pi)' + eps BB'.
/// Within each node interval Pi is integrated alongside Sigma from its node
/// value, so the scheme stays fourth order in the closed-loop rate.
template <typename Scalar>
std::vector<MatrixX<Scalar>> lyapunov_propagate(const MatrixX<Scalar>& sigma_start,
                                                const std::vector<MatrixX<Scalar>>& pi,
                                                const LinearSegment<Scalar>& seg, Scalar eps) {
  seg.validate();
  if (pi.size() != seg.node_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "Pi schedule length");
  }
  const Eigen::Index n = seg.state_dim();
  auto rhs = [&](std::size_t k, Scalar th, const MatrixX<Scalar>& y) -> MatrixX<Scalar> {
    const MatrixX<Scalar> a = seg.a_at(k, th), b = seg.b_at(k, th);
    const MatrixX<Scalar> p = y.leftCols(n);
    MatrixX<Scalar> out(n, 2 * n);
    out.leftCols(n) = detail::pi_rate<Scalar>(a, b, seg.q_at(k, th), p);
    out.rightCols(n) = detail::sigma_rate<Scalar>(a, b, p, y.rightCols(n), eps);
    return out;
  };
  std::vector<MatrixX<Scalar>> out;
  out.reserve(seg.node_count());
  out.push_back(symmetrize(sigma_start));
  MatrixX<Scalar> y(n, 2 * n);
  for (std::size_t k = 0; k + 1 < seg.node_count(); ++k) {
    y << pi[k], out.back();
    const int pieces = std::max(detail::closed_loop_pieces(seg, k, pi[k]),
                                detail::closed_loop_pieces(seg, k, pi[k + 1]));
    y = detail::rk4_substeps<Scalar>(rhs, k, seg.times[k + 1] - seg.times[k], y, true, pieces);
    out.push_back(symmetrize(MatrixX<Scalar>(y.rightCols(n))));
    const Scalar lo = min_eigenvalue(out.back());
    if (lo < -Scalar(1e-12) * std::max<Scalar>(Scalar(1), out.back().norm())) {
      throw Error(ErrorCode::kPsdViolation,
                  "covariance eigenvalue " + std::to_string(double(lo)));
    }
  }
  return out;
}

template <typename Scalar>
std::vector<MatrixX<Scalar>> feedback_gain(const std::vector<MatrixX<Scalar>>& pi,
                                           const LinearSegment<Scalar>& seg) {
  std::vector<MatrixX<Scalar>> k(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) k[i] = -seg.b[i].transpose() * pi[i];
  return k;
}

/// Schedules of one steered segment. `h` is empty when the segment was
/// recovered from its terminal value (singular start covariance).
template <typename Scalar>
struct SteeringSolution {
  std::vector<Scalar> times;
  std::vector<MatrixX<Scalar>> pi;
  std::vector<MatrixX<Scalar>> h;
  std::vector<MatrixX<Scalar>> sigma;
  std::vector<MatrixX<Scalar>> gain;
  Scalar epsilon{1};
  MatrixX<Scalar> sigma0;
  MatrixX<Scalar> sigma_t;
};

/// Full schedules for a segment given its initial Riccati values.
template <typename Scalar>
SteeringSolution<Scalar> propagate_segment(const LinearSegment<Scalar>& seg,
                                           const MatrixX<Scalar>& sigma_start,
                                           const MatrixX<Scalar>& pi0,
                                           const MatrixX<Scalar>* h0, Scalar eps) {
  SteeringSolution<Scalar> sol;
  sol.times = seg.times;
  sol.epsilon = eps;
  sol.pi = riccati_integrate(pi0, seg, Direction::kForward);
  if (h0 != nullptr) sol.h = h_riccati_integrate(*h0, seg);
  sol.sigma = lyapunov_propagate(sigma_start, sol.pi, seg, eps);
  sol.gain = feedback_gain(sol.pi, seg);
  sol.sigma0 = sigma_start;
  return sol;
}

/// Steer Sigma0 to SigmaT on the segment using the initial-value form.
template <typename Scalar>
SteeringSolution<Scalar> steer_smooth(const LinearSegment<Scalar>& seg,
                                      const MatrixX<Scalar>& sigma0,
                                      const MatrixX<Scalar>& sigma_t, Scalar eps) {
  const auto kernel = hamiltonian_kernel(seg);
  const auto bv = solve_smooth_cs(sigma0, sigma_t, kernel, eps);
  auto sol = propagate_segment(seg, sigma0, bv.pi, &bv.h, eps);
  sol.sigma_t = sigma_t;
  return sol;
}

/// Steer a possibly singular start covariance to SigmaT using the terminal
/// form and a backward Riccati sweep.
template <typename Scalar>
SteeringSolution<Scalar> steer_smooth_terminal(const LinearSegment<Scalar>& seg,
                                               const MatrixX<Scalar>& sigma_start,
                                               const MatrixX<Scalar>& sigma_t, Scalar eps) {
  const auto kernel = hamiltonian_kernel(seg);
  const MatrixX<Scalar> pi_t = terminal_pi(sigma_start, sigma_t, kernel, eps);
  SteeringSolution<Scalar> sol;
  sol.times = seg.times;
  sol.epsilon = eps;
  sol.pi = riccati_integrate(pi_t, seg, Direction::kReverse);
  sol.sigma = lyapunov_propagate(sigma_start, sol.pi, seg, eps);
  sol.gain = feedback_gain(sol.pi, seg);
  sol.sigma0 = sigma_start;
  sol.sigma_t = sigma_t;
  return sol;
}

/// Expected running cost E int |u|^2 + X'QX along a solved segment
/// (trapezoid rule on the node grid).
template <typename Scalar>
Scalar segment_cost(const SteeringSolution<Scalar>& sol, const LinearSegment<Scalar>& seg) {
  std::vector<Scalar> f(sol.times.size());
  for (std::size_t k = 0; k < f.size(); ++k) {
    MatrixX<Scalar> pb = sol.pi[k] * seg.b[k];
    f[k] = ((pb * pb.transpose() + seg.q[k]) * sol.sigma[k]).trace();
  }
  Scalar acc(0);
  for (std::size_t k = 0; k + 1 < f.size(); ++k) {
    acc += Scalar(0.5) * (sol.times[k + 1] - sol.times[k]) * (f[k] + f[k + 1]);
  }
  return acc;
}

using LinearSegmentd = LinearSegment<double>;
using KernelBlocksd = KernelBlocks<double>;
using SteeringSolutiond = SteeringSolution<double>;

}  // namespace hcs
