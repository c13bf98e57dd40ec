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

#include "hcs/hybrid_analytic.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace hcs {
namespace {

using testing::Rng;

TEST(JumpKernel, IsSymplectic) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = rng.integer(1, 5);
    auto k = jump_kernel<double>(rng.invertible(n), 0.3);
    for (double r : symplectic_residuals(k)) EXPECT_LE(r, 1e-12);
    EXPECT_EQ(k.t_from, 0.3);
    EXPECT_EQ(k.phi12.norm(), 0.0);
  }
}

TEST(JumpKernel, RejectsSingularAndRectangular) {
  Matrix singular(2, 2);
  singular << 1, 2, 2, 4;
  EXPECT_THROW(jump_kernel<double>(singular), Error);
  try {
    jump_kernel<double>(Matrix::Ones(3, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoninvertibleSaltation);
  }
}

TEST(HybridKernel, CompositionIsSymplectic) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = rng.integer(1, 4);
    std::vector<LinearSegmentd> segs{rng.segment(n, 0.0, 0.4, 2e-3), rng.segment(n, 0.4, 0.7, 2e-3),
                                      rng.segment(n, 0.7, 1.0, 2e-3)};
    std::vector<Matrix> xis{rng.invertible(n), rng.invertible(n)};
    auto hk = build_hybrid_kernel(segs, xis);
    EXPECT_LE(max_symplectic_residual(hk.composed), 1e-8);
    EXPECT_EQ(hk.composed.t_from, 0.0);
    EXPECT_EQ(hk.composed.t_to, 1.0);
    // The path's last entry equals the composed kernel.
    auto path = hybrid_kernel_path(segs, xis);
    EXPECT_LT((path.back().second - hk.composed.full()).norm(), 1e-12 * hk.composed.full().norm());
    EXPECT_EQ(path.size(), segs[0].node_count() + segs[1].node_count() + segs[2].node_count() - 2 + 2);
  }
}

TEST(HybridKernel, ChainLengthMismatch) {
  Rng rng(3);
  std::vector<LinearSegmentd> segs{rng.segment(2, 0.0, 0.5, 1e-2), rng.segment(2, 0.5, 1.0, 1e-2)};
  try {
    build_hybrid_kernel<double>(segs, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(HybridAnalytic, IdentityJumpReducesToSmooth) {
  Matrix a(2, 2), b(2, 1);
  a << 0, 1, -2, -0.3;
  b << 0, 1;
  const Matrix q = 0.1 * Matrix::Identity(2, 2);
  auto whole = LinearSegmentd::constant(a, b, q, 0.0, 1.0, 1e-3);
  auto first = LinearSegmentd::constant(a, b, q, 0.0, 0.4, 1e-3);
  auto second = LinearSegmentd::constant(a, b, q, 0.4, 1.0, 1e-3);
  Matrix s0(2, 2), st(2, 2);
  s0 << 0.5, 0.1, 0.1, 0.4;
  st << 0.2, 0.0, 0.0, 0.3;
  auto smooth = steer_smooth<double>(whole, s0, st, 0.7);
  auto hyb = solve_hybrid_analytic<double>({first, second}, {Matrix::Identity(2, 2)}, s0, st, 0.7);
  EXPECT_LT((hyb.segments[0].pi.front() - smooth.pi.front()).norm(), 1e-9);
  EXPECT_LT((hyb.terminal_sigma() - smooth.sigma.back()).norm(), 1e-9);
  EXPECT_LT((hyb.sigma_minus() - smooth.sigma[400]).norm(), 1e-9);
  EXPECT_NEAR(hyb.cost, segment_cost(smooth, whole), 1e-9);
}

TEST(HybridAnalytic, ScalarShootingOracle) {
  // Two unit-rate integrators joined by x+ = -0.6 x-.
  auto first = LinearSegmentd::constant(Matrix::Constant(1, 1, 0.2), Matrix::Ones(1, 1),
                                        Matrix::Zero(1, 1), 0.0, 0.6, 1e-3);
  auto second = LinearSegmentd::constant(Matrix::Constant(1, 1, -0.5), Matrix::Ones(1, 1),
                                         Matrix::Zero(1, 1), 0.6, 1.0, 1e-3);
  const std::vector<Matrix> xis{Matrix::Constant(1, 1, -0.6)};
  const Matrix s0 = Matrix::Constant(1, 1, 0.3), st = Matrix::Constant(1, 1, 0.05);
  auto hyb = solve_hybrid_analytic<double>({first, second}, xis, s0, st, 0.2);
  Matrix shot = testing::newton_shooting({first, second}, xis, Matrix::Zero(1, 1), s0, st, 0.2);
  EXPECT_NEAR(hyb.segments[0].pi.front()(0, 0), shot(0, 0), 1e-7);
  EXPECT_NEAR(hyb.terminal_sigma()(0, 0), 0.05, 1e-7);
}

TEST(HybridAnalytic, RandomInstancesMatchShootingAndHitTarget) {
  Rng rng(4);
  for (int trial = 0; trial < 4; ++trial) {
    const Eigen::Index n = rng.integer(2, 3);
    std::vector<LinearSegmentd> segs{rng.segment(n, 0.0, 0.5, 2e-3), rng.segment(n, 0.5, 1.0, 2e-3)};
    std::vector<Matrix> xis{rng.invertible(n)};
    Matrix s0 = rng.spd(n), st = rng.spd(n);
    const double eps = rng.uniform(0.3, 1.2);
    auto hyb = solve_hybrid_analytic(segs, xis, s0, st, eps);
    EXPECT_LT(relative_error(hyb.terminal_sigma(), st), 1e-6);
    const Matrix& pi0 = hyb.segments[0].pi.front();
    Matrix shot = testing::newton_shooting(segs, xis, Matrix(pi0 * 1.05), s0, st, eps);
    EXPECT_LT((shot - pi0).norm() / pi0.norm(), 1e-6) << "trial " << trial;
  }
}

TEST(HybridAnalytic, JumpConditionsHold) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = rng.integer(1, 4);
    std::vector<LinearSegmentd> segs{rng.segment(n, 0.0, 0.3, 2e-3), rng.segment(n, 0.3, 0.8, 2e-3),
                                      rng.segment(n, 0.8, 1.2, 2e-3)};
    std::vector<Matrix> xis{rng.invertible(n), rng.invertible(n)};
    const double eps = rng.uniform(0.3, 1.2);
    auto hyb = solve_hybrid_analytic(segs, xis, rng.spd(n), rng.spd(n), eps);
    ASSERT_EQ(hyb.jumps.size(), 2u);
    for (const auto& j : hyb.jumps) {
      EXPECT_LT(pi_jump_residual(j), 1e-12);
      EXPECT_LT(std::abs(jump_cost(j)), 1e-10 * std::max(1.0, (j.pi_minus * j.sigma_minus).norm()));
      EXPECT_LT((j.sigma_plus - j.xi * j.sigma_minus * j.xi.transpose()).norm(), 1e-12);
    }
    // The coupling eps Sigma^-1 = Pi + H survives each jump.
    for (const auto& s : hyb.segments) {
      Matrix cpl = eps * s.sigma.front().inverse();
      EXPECT_LT((cpl - s.pi.front() - s.h.front()).norm() / cpl.norm(), 1e-6);
      cpl = eps * s.sigma.back().inverse();
      EXPECT_LT((cpl - s.pi.back() - s.h.back()).norm() / cpl.norm(), 1e-6);
    }
  }
}

TEST(HybridAnalytic, CostMatchesRiccatiIdentity) {
  // E int (|u|^2 + X'QX) = eps int tr(B'Pi B) + tr(Pi(0)Sigma0) - tr(Pi(T)SigmaT)
  // when the jump term vanishes.
  Rng rng(6);
  const Eigen::Index n = 2;
  std::vector<LinearSegmentd> segs{rng.segment(n, 0.0, 0.5, 1e-3), rng.segment(n, 0.5, 1.0, 1e-3)};
  std::vector<Matrix> xis{rng.invertible(n)};
  Matrix s0 = rng.spd(n), st = rng.spd(n);
  const double eps = 0.5;
  auto hyb = solve_hybrid_analytic(segs, xis, s0, st, eps);
  double rhs = 0.0;
  for (std::size_t j = 0; j < segs.size(); ++j) {
    const auto& s = hyb.segments[j];
    for (std::size_t k = 0; k + 1 < s.times.size(); ++k) {
      const double f0 = (segs[j].b[k].transpose() * s.pi[k] * segs[j].b[k]).trace();
      const double f1 = (segs[j].b[k + 1].transpose() * s.pi[k + 1] * segs[j].b[k + 1]).trace();
      rhs += 0.5 * (s.times[k + 1] - s.times[k]) * eps * (f0 + f1);
    }
  }
  rhs += (hyb.segments.front().pi.front() * s0).trace() - (hyb.segments.back().pi.back() * st).trace();
  EXPECT_NEAR(hyb.cost, rhs, 1e-4 * std::max(1.0, std::abs(rhs)));
}

TEST(HybridAnalytic, KernelRatioMonotoneAcrossJumps) {
  Rng rng(8);
  const Eigen::Index n = 2;
  std::vector<LinearSegmentd> segs{rng.segment(n, 0.0, 0.5, 5e-3), rng.segment(n, 0.5, 1.0, 5e-3)};
  std::vector<Matrix> xis{rng.invertible(n)};
  auto path = hybrid_kernel_path(segs, xis);
  // Phi11^-1 Phi12 is non-increasing in the PSD order on the hybrid arc;
  // the jump itself leaves it unchanged.
  Matrix prev = Matrix::Zero(n, n);
  for (std::size_t k = 1; k < path.size(); ++k) {
    auto b = KernelBlocksd::from_full(path[k].second, n, n);
    Matrix cur = b.phi11.lu().solve(b.phi12);
    EXPECT_GE(min_eigenvalue(Matrix(prev - cur)), -1e-10);
    prev = cur;
  }
}

}  // namespace
}  // namespace hcs
