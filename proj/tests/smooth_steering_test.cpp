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

#include "hcs/smooth_steering.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

namespace hcs {
namespace {

using testing::Rng;

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

TEST(HamiltonianKernel, PureIntegratorIsNilpotentExponential) {
  const double tau = 0.7;
  auto seg = LinearSegmentd::constant(Matrix::Zero(2, 2), Matrix::Identity(2, 2),
                                      Matrix::Zero(2, 2), 0.0, tau, 0.01);
  auto k = hamiltonian_kernel(seg);
  EXPECT_TRUE(k.phi11.isApprox(Matrix::Identity(2, 2), 1e-13));
  EXPECT_TRUE(k.phi12.isApprox(-tau * Matrix::Identity(2, 2), 1e-12));
  EXPECT_LT(k.phi21.norm(), 1e-14);
  EXPECT_TRUE(k.phi22.isApprox(Matrix::Identity(2, 2), 1e-13));
}

TEST(HamiltonianKernel, IdentityAtZeroLength) {
  Rng rng(3);
  auto seg = rng.segment(3, 0.0, 0.5, 0.01);
  auto path = hamiltonian_kernel_path(seg);
  EXPECT_EQ(path.front(), Matrix::Identity(6, 6));
}

TEST(HamiltonianKernel, ScalarClosedForm) {
  const double a = -0.8, tau = 1.3;
  auto seg = LinearSegmentd::constant(scalar(a), scalar(1), scalar(0), 0.0, tau, 1e-3);
  auto k = hamiltonian_kernel(seg);
  EXPECT_NEAR(k.phi11(0, 0), std::exp(a * tau), 1e-11);
  EXPECT_NEAR(k.phi22(0, 0), std::exp(-a * tau), 1e-11);
  EXPECT_NEAR(k.phi12(0, 0), -(std::exp(a * tau) - std::exp(-a * tau)) / (2 * a), 1e-11);
  EXPECT_NEAR(k.phi21(0, 0), 0.0, 1e-14);
}

TEST(HamiltonianKernel, SymplecticIdentitiesOnRandomGrids) {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = rng.integer(1, 4);
    auto seg = rng.segment(n, 0.0, rng.uniform(0.3, 1.5), 2e-3);
    auto k = hamiltonian_kernel(seg);
    for (double r : symplectic_residuals(k)) EXPECT_LE(r, 1e-8);
  }
}

TEST(HamiltonianKernel, MonotoneInPsdOrder) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = rng.integer(1, 3);
    auto seg = rng.segment(n, 0.0, 1.0, 5e-3);
    auto path = hamiltonian_kernel_path(seg);
    Matrix prev = Matrix::Zero(n, n);
    for (std::size_t k = 1; k < path.size(); ++k) {
      auto blocks = KernelBlocksd::from_full(path[k], n, n);
      Matrix cur = blocks.phi11.lu().solve(blocks.phi12);
      EXPECT_GE(min_eigenvalue(Matrix(prev - cur)), -1e-10);
      prev = cur;
    }
  }
}

TEST(HamiltonianKernel, CoarseGridIsRejected) {
  Matrix a(2, 2);
  a << 0, 40, -40, 0;
  auto seg = LinearSegmentd::constant(a, Matrix::Identity(2, 2), Matrix::Zero(2, 2), 0.0, 1.0, 0.1);
  try {
    hamiltonian_kernel(seg);
    FAIL() << "expected ill-conditioned-kernel";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIllConditionedKernel);
  }
}

TEST(SolveSmoothCs, ScalarIntegratorClosedForm) {
  auto seg = LinearSegmentd::constant(scalar(0), scalar(1), scalar(0), 0.0, 1.0, 1e-3);
  auto k = hamiltonian_kernel(seg);
  auto bv = solve_smooth_cs<double>(scalar(1), scalar(1), k, 1.0);
  EXPECT_NEAR(bv.pi(0, 0), 1.5 - std::sqrt(5.0) / 2.0, 1e-12);
  EXPECT_NEAR(bv.pi(0, 0) + bv.h(0, 0), 1.0, 1e-14);

  auto sol = steer_smooth<double>(seg, scalar(1), scalar(1), 1.0);
  EXPECT_NEAR(sol.sigma.back()(0, 0), 1.0, 1e-6);
  EXPECT_NEAR(testing::shoot_sigma({seg}, {}, bv.pi, scalar(1), 1.0)(0, 0), 1.0, 1e-6);
}

TEST(SolveSmoothCs, BoundaryCouplingHoldsExactlyAtStart) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = rng.integer(1, 4);
    const double eps = rng.uniform(0.2, 2.0);
    auto seg = rng.segment(n, 0.0, 1.0, 5e-3);
    Matrix s0 = rng.spd(n), st = rng.spd(n);
    auto bv = solve_smooth_cs(s0, st, hamiltonian_kernel(seg), eps);
    Matrix lhs = eps * s0.inverse();
    EXPECT_LT((lhs - bv.pi - bv.h).norm(), 1e-10 * lhs.norm());
    EXPECT_LT((bv.pi - bv.pi.transpose()).norm(), 1e-12);
  }
}

TEST(SolveSmoothCs, ShootingOracleAgreesOnRandom3x3) {
  Rng rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    auto seg = rng.segment(3, 0.0, 1.0, 5e-3);
    Matrix s0 = rng.spd(3), st = rng.spd(3);
    const double eps = rng.uniform(0.3, 1.5);
    auto bv = solve_smooth_cs(s0, st, hamiltonian_kernel(seg), eps);
    Matrix start = bv.pi * 1.05 + 0.02 * Matrix::Identity(3, 3);
    Matrix shot = testing::newton_shooting({seg}, {}, start, s0, st, eps);
    EXPECT_LT((shot - bv.pi).norm() / bv.pi.norm(), 1e-6);
    auto sol = steer_smooth(seg, s0, st, eps);
    EXPECT_LT(relative_error(sol.sigma.back(), st), 1e-6);
  }
}

TEST(SolveSmoothCs, SingularPhi12IsReported) {
  auto seg = LinearSegmentd::constant(Matrix::Zero(2, 2), Matrix::Zero(2, 2), Matrix::Zero(2, 2),
                                      0.0, 1.0, 0.01);
  try {
    solve_smooth_cs<double>(Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                            hamiltonian_kernel(seg), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularPhi12);
  }
}

TEST(TerminalPi, MatchesForwardIntegratedRiccati) {
  Rng rng(13);
  {
    auto seg = LinearSegmentd::constant(scalar(0), scalar(1), scalar(0), 0.0, 1.0, 1e-3);
    auto k = hamiltonian_kernel(seg);
    auto bv = solve_smooth_cs<double>(scalar(1), scalar(1), k, 1.0);
    auto pi = riccati_integrate(bv.pi, seg, Direction::kForward);
    EXPECT_NEAR(terminal_pi<double>(scalar(1), scalar(1), k, 1.0)(0, 0), pi.back()(0, 0), 1e-9);
    // a = 0 and equal boundaries: the optimal path is time symmetric and the
    // Pi and H equations swap under t -> T - t, so Pi(T) = H(0).
    EXPECT_NEAR(pi.back()(0, 0), bv.h(0, 0), 1e-9);
  }
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = rng.integer(1, 4);
    auto seg = rng.segment(n, 0.0, 1.0, 2e-3);
    Matrix s0 = rng.spd(n), st = rng.spd(n);
    const double eps = rng.uniform(0.3, 1.5);
    auto k = hamiltonian_kernel(seg);
    auto bv = solve_smooth_cs(s0, st, k, eps);
    auto pi = riccati_integrate(bv.pi, seg, Direction::kForward);
    Matrix pit = terminal_pi(s0, st, k, eps);
    EXPECT_LT((pit - pi.back()).norm() / std::max(1.0, pit.norm()), 1e-6);
  }
}

TEST(TerminalPi, SingularStartStillSteers) {
  Rng rng(17);
  auto seg = rng.segment(3, 0.0, 1.0, 2e-3);
  Vector v = rng.gaussian(3, 1);
  Matrix s0 = v * v.transpose();  // rank one
  Matrix st = rng.spd(3);
  auto sol = steer_smooth_terminal(seg, s0, st, 0.8);
  EXPECT_LT(relative_error(sol.sigma.back(), st), 1e-6);
  EXPECT_TRUE(sol.h.empty());
}

TEST(RiccatiIntegrate, ZeroIsFixedPoint) {
  auto seg = LinearSegmentd::constant(Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                      Matrix::Zero(2, 2), 0.0, 1.0, 0.01);
  for (const auto& p : riccati_integrate(Matrix(Matrix::Zero(2, 2)), seg, Direction::kReverse)) {
    EXPECT_EQ(p.norm(), 0.0);
  }
}

TEST(RiccatiIntegrate, ScalarTanh) {
  auto seg = LinearSegmentd::constant(scalar(0), scalar(1), scalar(1), 0.0, 1.0, 1e-3);
  auto pi = riccati_integrate(scalar(0), seg, Direction::kReverse);
  EXPECT_NEAR(pi.front()(0, 0), std::tanh(1.0), 1e-12);
  for (std::size_t k = 0; k < pi.size(); k += 100) {
    EXPECT_NEAR(pi[k](0, 0), std::tanh(1.0 - seg.times[k]), 1e-12);
  }
  auto gain = feedback_gain(pi, seg);
  EXPECT_NEAR(gain.front()(0, 0), -std::tanh(1.0), 1e-12);
}

TEST(RiccatiIntegrate, BlowupIsReported) {
  // -dPi/dt = -Pi^2 forward from Pi(0) = 10 escapes at t = 0.1.
  auto seg = LinearSegmentd::constant(scalar(0), scalar(1), scalar(0), 0.0, 1.0, 1e-3);
  try {
    riccati_integrate(scalar(10), seg, Direction::kForward);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRiccatiBlowup);
  }
}

TEST(RiccatiIntegrate, AgreesWithKernelRatio) {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = rng.integer(1, 4);
    auto seg = rng.segment(n, 0.0, 1.0, 2e-3);
    auto k = hamiltonian_kernel(seg);
    auto bv = solve_smooth_cs(rng.spd(n), rng.spd(n), k, 1.0);
    auto pi = riccati_integrate(bv.pi, seg, Direction::kForward);
    auto path = hamiltonian_kernel_path(seg);
    for (std::size_t i = 0; i < path.size(); i += 50) {
      Matrix xy = path[i].leftCols(n) + path[i].rightCols(n) * bv.pi;
      Matrix ratio = xy.bottomRows(n) * xy.topRows(n).inverse();
      EXPECT_LT((ratio - pi[i]).norm() / std::max(1.0, pi[i].norm()), 1e-7);
    }
  }
}

TEST(LyapunovPropagate, Trivial) {
  auto seg = LinearSegmentd::constant(scalar(0), scalar(1), scalar(0), 0.0, 2.0, 0.01);
  std::vector<Matrix> pi(seg.node_count(), scalar(0));
  auto zero = lyapunov_propagate<double>(scalar(0), pi, seg, 0.0);
  for (const auto& s : zero) EXPECT_EQ(s(0, 0), 0.0);
  auto diff = lyapunov_propagate<double>(scalar(0.4), pi, seg, 1.0);
  for (std::size_t k = 0; k < diff.size(); ++k) {
    EXPECT_NEAR(diff[k](0, 0), 0.4 + seg.times[k], 1e-12);
  }
}

TEST(LyapunovPropagate, NegativeStartIsRejected) {
  auto seg = LinearSegmentd::constant(scalar(0), scalar(1), scalar(0), 0.0, 1.0, 0.01);
  std::vector<Matrix> pi(seg.node_count(), scalar(0));
  EXPECT_THROW(lyapunov_propagate<double>(scalar(-0.5), pi, seg, 0.0), Error);
}

TEST(SteerSmooth, BoundaryCouplingAtTerminalTime) {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = rng.integer(1, 4);
    const double eps = rng.uniform(0.3, 1.5);
    auto seg = rng.segment(n, 0.0, 1.0, 2e-3);
    Matrix s0 = rng.spd(n), st = rng.spd(n);
    auto sol = steer_smooth(seg, s0, st, eps);
    Matrix lhs = eps * st.inverse();
    EXPECT_LT((lhs - sol.pi.back() - sol.h.back()).norm() / lhs.norm(), 1e-6);
    for (std::size_t k = 0; k < sol.times.size(); k += 100) {
      Matrix cpl = eps * sol.sigma[k].inverse();
      EXPECT_LT((cpl - sol.pi[k] - sol.h[k]).norm() / cpl.norm(), 1e-6);
    }
  }
}

TEST(SteerSmooth, FiftyRandomInstancesHitTarget) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = rng.integer(1, 4);
    auto seg = rng.segment(n, 0.0, rng.uniform(0.5, 1.5), 2e-3, trial % 2 == 0);
    Matrix s0 = rng.spd(n), st = rng.spd(n);
    auto sol = steer_smooth(seg, s0, st, rng.uniform(0.2, 2.0));
    EXPECT_LT(relative_error(sol.sigma.back(), st), 1e-6) << "trial " << trial;
    EXPECT_EQ(sol.gain.front().rows(), seg.input_dim());
    EXPECT_EQ(sol.gain.front().cols(), n);
  }
}

}  // namespace
}  // namespace hcs
