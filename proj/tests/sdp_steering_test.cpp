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

#include "hcs/sdp_steering.hpp"

#include "hcs/hybrid_model.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>

#include "test_util.hpp"

namespace hcs {
namespace {

using testing::Rng;

LinearSegmentd scalar_segment(double a, double b, double t0, double tf, double dt) {
  return LinearSegmentd::constant(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b),
                                  Matrix::Zero(1, 1), t0, tf, dt);
}

SdpProblem chain_problem(const std::vector<LinearSegmentd>& segs, const std::vector<Matrix>& xis,
                         const Matrix& sigma0, const Matrix& sigma_t, double eps) {
  SdpProblem p;
  for (const auto& s : segs) p.segments.push_back(build_prior(s));
  p.xis = xis;
  p.sigma0 = sigma0;
  p.sigma_t = sigma_t;
  p.epsilon = eps;
  return p;
}

// Random strictly feasible candidate near the prior.
SdpVariables random_candidate(Rng& rng, const SdpProblem& p, double eta) {
  SdpVariables v = prior_variables(p, 0.5, eta);
  for (auto& s : v.sigma_minus) s += 0.1 * rng.spd(s.rows(), 0.3, 0.1);
  for (auto& w : v.w) w += rng.gaussian(w.rows(), w.cols(), 0.02);
  return v;
}

SdpVariables blend(const SdpVariables& a, const SdpVariables& b, double th) {
  SdpVariables out = a;
  for (std::size_t i = 0; i < a.sigma_minus.size(); ++i)
    out.sigma_minus[i] = th * a.sigma_minus[i] + (1 - th) * b.sigma_minus[i];
  for (std::size_t i = 0; i < a.w.size(); ++i) out.w[i] = th * a.w[i] + (1 - th) * b.w[i];
  return out;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

TEST(BuildPrior, ZeroStateCostKeepsDrift) {
  Rng rng(1);
  const LinearSegmentd seg = rng.segment(3, 0.0, 0.8, 1e-3, /*with_q=*/false, false);
  const PriorSegment prior = build_prior(seg);
  for (const auto& pi : prior.pi_hat) EXPECT_EQ(pi.norm(), 0.0);
  const Matrix expm = (seg.a.front() * 0.8).exp();
  EXPECT_LE((prior.phi - expm).norm(), 1e-10);
}

TEST(BuildPrior, IntegratorGramian) {
  const LinearSegmentd seg = LinearSegmentd::constant(Matrix::Zero(2, 2), Matrix::Identity(2, 2),
                                                      Matrix::Zero(2, 2), 0.0, 0.7, 0.01);
  const PriorSegment prior = build_prior(seg);
  EXPECT_LE((prior.phi - Matrix::Identity(2, 2)).norm(), 1e-14);
  EXPECT_LE((prior.gramian - 0.7 * Matrix::Identity(2, 2)).norm(), 1e-13);
}

TEST(BuildPrior, ScalarGramianClosedForm) {
  for (double a : {-1.3, -0.2, 0.4, 1.1}) {
    const double tau = 0.9;
    const PriorSegment prior = build_prior(scalar_segment(a, 1.0, 0.0, tau, 1e-3));
    EXPECT_NEAR(prior.gramian(0, 0), (std::exp(2 * a * tau) - 1) / (2 * a), 1e-11);
    EXPECT_NEAR(prior.phi(0, 0), std::exp(a * tau), 1e-12);
  }
}

TEST(BuildPrior, TerminalPiIsZeroAndGramianMatchesQuadrature) {
  Rng rng(2);
  const LinearSegmentd seg = rng.segment(2, 0.0, 0.6, 1e-3);
  const PriorSegment prior = build_prior(seg);
  EXPECT_EQ(prior.pi_hat.back().norm(), 0.0);
  // Trapezoid quadrature of Phi(tf, t) B B' Phi(tf, t)' with
  // Phi(tf, t) = Phi(tf, t0) Phi(t, t0)^-1.
  const LinearSegmentd& fine = seg;
  std::vector<Matrix> phi_t{Matrix::Identity(2, 2)};
  for (std::size_t k = 0; k + 1 < fine.node_count(); ++k) {
    auto rhs = [&](std::size_t kk, double th, const Matrix& y) -> Matrix {
      const Matrix b = fine.b_at(kk, th);
      // Pi_hat linear between nodes is accurate enough for a 1e-6 check.
      const Matrix pi = (1 - th) * prior.pi_hat[kk] + th * prior.pi_hat[kk + 1];
      return (fine.a_at(kk, th) - b * b.transpose() * pi) * y;
    };
    phi_t.push_back(detail::rk4_step<double>(rhs, k, fine.times[k + 1] - fine.times[k],
                                             phi_t.back(), true));
  }
  const Matrix phi_end = phi_t.back();
  Matrix s = Matrix::Zero(2, 2);
  for (std::size_t k = 0; k + 1 < fine.node_count(); ++k) {
    auto integrand = [&](std::size_t i) {
      const Matrix m = phi_end * phi_t[i].inverse() * fine.b[i];
      return Matrix(m * m.transpose());
    };
    s += 0.5 * (fine.times[k + 1] - fine.times[k]) * (integrand(k) + integrand(k + 1));
  }
  EXPECT_LE((prior.phi - phi_end).norm(), 1e-6);
  EXPECT_LE((prior.gramian - s).norm() / s.norm(), 1e-5);
}

TEST(BuildPrior, SingularGramianRejected) {
  Matrix b(2, 1);
  b << 1.0, 0.0;
  const LinearSegmentd seg =
      LinearSegmentd::constant(Matrix::Zero(2, 2), b, Matrix::Zero(2, 2), 0.0, 1.0, 0.01);
  try {
    build_prior(seg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGramianSingular);
  }
}

TEST(JointPrior, Examples) {
  const PriorSegment unit = prior_from_blocks(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  Matrix expected(4, 4);
  expected << Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2),
      2 * Matrix::Identity(2, 2);
  EXPECT_EQ((joint_prior_covariance(unit, Matrix::Identity(2, 2), 1.0) - expected).norm(), 0.0);

  Rng rng(3);
  const PriorSegment prior = build_prior(rng.segment(3, 0.0, 0.5, 1e-3));
  const Matrix zero = joint_prior_covariance(prior, Matrix::Zero(3, 3), 0.4);
  EXPECT_EQ(zero.topLeftCorner(3, 3).norm(), 0.0);
  EXPECT_LE((zero.bottomRightCorner(3, 3) - 0.4 * prior.gramian).norm(), 1e-15);

  for (int trial = 0; trial < 10; ++trial) {
    const Matrix ss = rng.spd(3);
    const Matrix joint = joint_prior_covariance(prior, ss, 0.7);
    EXPECT_GE(min_eigenvalue(joint), -1e-12);
    const Matrix schur = joint.bottomRightCorner(3, 3) -
                         joint.bottomLeftCorner(3, 3) * ss.inverse() * joint.topRightCorner(3, 3);
    EXPECT_LE((schur - 0.7 * prior.gramian).norm(), 1e-10 * prior.gramian.norm());
  }
}

TEST(Objective, MatchesRelativeEntropyRoute) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = rng.integer(1, 3);
    const std::size_t k = std::size_t(rng.integer(2, 4));
    std::vector<LinearSegmentd> segs;
    std::vector<Matrix> xis;
    for (std::size_t j = 0; j < k; ++j) {
      segs.push_back(rng.segment(n, 0.3 * j, 0.3 * (j + 1), 5e-3));
      if (j + 1 < k) xis.push_back(rng.invertible(n));
    }
    const SdpProblem p = chain_problem(segs, xis, rng.spd(n), rng.spd(n), rng.uniform(0.2, 1.0));
    const SdpVariables v = random_candidate(rng, p, 0.0);
    const double lhs = objective_eval(v, p) + objective_constant(p);
    const double rhs = 2.0 * kl_objective(v, p);
    EXPECT_NEAR(lhs, rhs, 1e-8 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(Objective, PriorCandidateSitsOnTheFloor) {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index n = rng.integer(1, 3);
    std::vector<LinearSegmentd> segs{rng.segment(n, 0.0, 0.4, 5e-3),
                                     rng.segment(n, 0.4, 0.9, 5e-3)};
    const Matrix xi = rng.invertible(n);
    const Matrix sigma0 = rng.spd(n);
    SdpProblem p = chain_problem(segs, {xi}, sigma0, Matrix::Identity(n, n), 0.6);
    // Terminal covariance chosen so the prior joint is attainable.
    const auto& s1 = p.segments[0];
    const auto& s2 = p.segments[1];
    const Matrix sm = s1.phi * sigma0 * s1.phi.transpose() + p.epsilon * s1.gramian;
    const Matrix sp = xi * sm * xi.transpose();
    p.sigma_t = s2.phi * sp * s2.phi.transpose() + p.epsilon * s2.gramian;
    SdpVariables v;
    v.sigma_minus = {sm};
    v.w = {Matrix(s1.phi * sigma0), Matrix(s2.phi * sp)};
    EXPECT_NEAR(kl_objective(v, p), 0.0, 1e-10);
    EXPECT_NEAR(objective_eval(v, p) + objective_constant(p), 0.0, 1e-9);
    // Every other candidate is above it.
    for (int i = 0; i < 5; ++i) {
      SdpVariables u = random_candidate(rng, p, 0.0);
      EXPECT_GT(objective_eval(u, p), objective_eval(v, p));
    }
  }
}

TEST(Objective, ConvexAlongChordsAndSecondDifferences) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = rng.integer(1, 3);
    std::vector<LinearSegmentd> segs{rng.segment(n, 0.0, 0.4, 1e-2),
                                     rng.segment(n, 0.4, 0.8, 1e-2)};
    const SdpProblem p =
        chain_problem(segs, {rng.invertible(n)}, rng.spd(n), rng.spd(n), rng.uniform(0.3, 1.0));
    const SdpVariables x = random_candidate(rng, p, 0.0);
    const SdpVariables y = random_candidate(rng, p, 0.0);
    const double fx = objective_eval(x, p), fy = objective_eval(y, p);
    for (double th : {0.1, 0.3, 0.5, 0.8}) {
      EXPECT_LE(objective_eval(blend(x, y, th), p), th * fx + (1 - th) * fy + 1e-10);
    }
    // Second differences in W_1 around x.
    const Matrix dir = rng.gaussian(n, n, 1.0);
    const double h = 1e-3;
    SdpVariables xp = x, xm = x;
    xp.w[0] += h * dir;
    xm.w[0] -= h * dir;
    const double second = objective_eval(xp, p) - 2 * fx + objective_eval(xm, p);
    EXPECT_GE(second, -1e-8);
  }
}

TEST(Objective, OutsideDomainThrows) {
  Rng rng(7);
  std::vector<LinearSegmentd> segs{rng.segment(2, 0.0, 0.4, 1e-2), rng.segment(2, 0.4, 0.8, 1e-2)};
  const SdpProblem p = chain_problem(segs, {rng.invertible(2)}, rng.spd(2), rng.spd(2), 0.5);
  SdpVariables v = prior_variables(p, 0.9);
  v.w[1] *= 100.0;
  try {
    objective_eval(v, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleLogdetDomain);
  }
}

TEST(SolveSdp, StationaryAtTheOptimum) {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index n = rng.integer(1, 3);
    std::vector<LinearSegmentd> segs{rng.segment(n, 0.0, 0.5, 1e-2),
                                     rng.segment(n, 0.5, 0.9, 1e-2),
                                     rng.segment(n, 0.9, 1.2, 1e-2)};
    const SdpProblem p = chain_problem(segs, {rng.invertible(n), rng.invertible(n)}, rng.spd(n),
                                       rng.spd(n), rng.uniform(0.3, 1.0));
    const SdpSolution sol = solve_sdp(p);
    const SdpVariables x = sol.variables();
    const double f0 = objective_eval(x, p);
    EXPECT_NEAR(f0, sol.objective, 1e-12 * std::max(1.0, std::abs(f0)));
    for (int d = 0; d < 6; ++d) {
      const double h = 1e-5;
      SdpVariables xp = x, xm = x;
      const Matrix ds = rng.spd(n, 1.0, 0.0);
      const Matrix dw = rng.gaussian(n, n);
      for (auto* v : {&xp, &xm}) {
        const double s = v == &xp ? h : -h;
        v->sigma_minus[d % 2] += s * ds;
        v->w[d % 3] += s * dw;
      }
      const double slope = (objective_eval(xp, p) - objective_eval(xm, p)) / (2 * h);
      EXPECT_LE(std::abs(slope), 1e-5 * (1 + std::abs(f0)));
    }
    EXPECT_GT(sol.min_domain_margin, 0.0);
    EXPECT_FALSE(sol.extrapolated);
    for (std::size_t j = 0; j < p.xis.size(); ++j) {
      EXPECT_EQ((sol.sigma_plus[j] -
                 symmetrize(Matrix(p.xis[j] * sol.sigma_minus[j] * p.xis[j].transpose())))
                    .norm(),
                0.0);
    }
  }
}

TEST(SolveSdp, MatchesClosedFormForInvertibleJumps) {
  Rng rng(9);
  for (int trial = 0; trial < 8; ++trial) {
    const Eigen::Index n = rng.integer(1, 3);
    std::vector<LinearSegmentd> segs{rng.segment(n, 0.0, 0.5, 2e-3, false),
                                     rng.segment(n, 0.5, 1.0, 2e-3, false)};
    const std::vector<Matrix> xis{rng.invertible(n)};
    const Matrix sigma0 = rng.spd(n), sigma_t = rng.spd(n);
    const double eps = rng.uniform(0.3, 1.0);
    const auto analytic = solve_hybrid_analytic(segs, xis, sigma0, sigma_t, eps);
    const SdpSolution sol = solve_sdp(chain_problem(segs, xis, sigma0, sigma_t, eps));
    EXPECT_LE(max_abs(analytic.sigma_minus() - sol.sigma_minus[0]), 1e-7);
    EXPECT_LE(max_abs(analytic.sigma_plus() - sol.sigma_plus[0]), 1e-7);
  }
}

TEST(SolveSdp, StateCostCouplingMatchesClosedForm) {
  Rng rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Index n = rng.integer(1, 3);
    std::vector<LinearSegmentd> segs{rng.segment(n, 0.0, 0.5, 2e-3),
                                     rng.segment(n, 0.5, 1.0, 2e-3)};
    const std::vector<Matrix> xis{rng.invertible(n)};
    const Matrix sigma0 = rng.spd(n), sigma_t = rng.spd(n);
    const double eps = rng.uniform(0.3, 1.0);
    const auto analytic = solve_hybrid_analytic(segs, xis, sigma0, sigma_t, eps);
    SdpProblem p = chain_problem(segs, xis, sigma0, sigma_t, eps);
    p.options.state_cost_coupling = true;
    const SdpSolution sol = solve_sdp(p);
    EXPECT_LE(max_abs(analytic.sigma_minus() - sol.sigma_minus[0]), 1e-7);
  }
}

// Scalar objective written out term by term, with Sigma+ = xi^2 s.
struct ScalarInstance {
  double phi1, s1, phi2, s2, xi, sigma0, sigma_t, eps;

  double part1(double sm, double w1) const {
    const double c = sm - w1 * w1 / sigma0;
    if (c <= 0) return INFINITY;
    return sm / (eps * s1) - 2 * phi1 * w1 / (eps * s1) - std::log(c);
  }
  double part2(double sm, double w2) const {
    const double sp = xi * xi * sm;
    const double c = sigma_t - w2 * w2 / sp;
    if (c <= 0) return INFINITY;
    return phi2 * phi2 * sp / (eps * s2) - 2 * phi2 * w2 / (eps * s2) - std::log(c);
  }
};

double golden_min(const std::function<double(double)>& f, double lo, double hi) {
  const double g = 0.5 * (std::sqrt(5.0) - 1);
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < 200 && b - a > 1e-13 * (1 + std::abs(a)); ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return f(0.5 * (a + b));
}

double grid_minimizer(const ScalarInstance& s, double hi) {
  double best = INFINITY, arg = 0.0;
  for (double sm = 1e-3; sm <= hi; sm += 1e-3) {
    const double r1 = std::sqrt(sm * s.sigma0);
    const double r2 = std::sqrt(s.sigma_t * s.xi * s.xi * sm);
    const double f = golden_min([&](double w) { return s.part1(sm, w); }, -r1, r1) +
                     golden_min([&](double w) { return s.part2(sm, w); }, -r2, r2);
    if (f < best) {
      best = f;
      arg = sm;
    }
  }
  return arg;
}

TEST(SolveSdp, ScalarGridSearchOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    const double a1 = rng.uniform(-1, 1), a2 = rng.uniform(-1, 1);
    const LinearSegmentd seg1 = scalar_segment(a1, rng.uniform(0.6, 1.4), 0.0, 0.5, 1e-3);
    const LinearSegmentd seg2 = scalar_segment(a2, rng.uniform(0.6, 1.4), 0.5, 1.0, 1e-3);
    const double xi = trial == 0 ? 0.5 : rng.uniform(0.3, 1.5) * (rng.uniform(0, 1) < 0.5 ? -1 : 1);
    const Matrix sigma0 = Matrix::Constant(1, 1, rng.uniform(0.3, 1.5));
    const Matrix sigma_t = Matrix::Constant(1, 1, rng.uniform(0.3, 1.5));
    const double eps = rng.uniform(0.3, 1.0);
    const SdpProblem p =
        chain_problem({seg1, seg2}, {Matrix::Constant(1, 1, xi)}, sigma0, sigma_t, eps);
    ScalarInstance s{p.segments[0].phi(0, 0), p.segments[0].gramian(0, 0),
                     p.segments[1].phi(0, 0), p.segments[1].gramian(0, 0),
                     xi, sigma0(0, 0), sigma_t(0, 0), eps};
    const double grid = grid_minimizer(s, 5.0);
    ASSERT_LT(grid, 4.9);
    const SdpSolution sol = solve_sdp(p);
    EXPECT_LE(std::abs(sol.sigma_minus[0](0, 0) - grid), 1e-3);
    const auto analytic = solve_hybrid_analytic<double>(
        {seg1, seg2}, {Matrix::Constant(1, 1, xi)}, sigma0, sigma_t, eps);
    EXPECT_LE(std::abs(analytic.sigma_minus()(0, 0) - grid), 1e-3);
  }
}

TEST(SolveSdp, RankDeficientJumpGivesSingularPostCovariance) {
  Rng rng(12);
  const LinearSegmentd seg1 = scalar_segment(-0.3, 1.0, 0.0, 0.5, 1e-3);
  const LinearSegmentd seg2 = rng.segment(2, 0.5, 1.2, 1e-3, false);
  Matrix xi(2, 1);
  xi << 1.0, 1.0;
  const Matrix sigma0 = Matrix::Constant(1, 1, 0.8);
  const Matrix sigma_t = rng.spd(2);
  const SdpProblem p = chain_problem({seg1, seg2}, {xi}, sigma0, sigma_t, 0.5);
  ASSERT_TRUE(p.needs_regularization());
  const SdpSolution sol = solve_sdp(p);
  EXPECT_TRUE(std::isfinite(sol.objective));
  EXPECT_EQ(sol.levels.size(), 3u);
  EXPECT_TRUE(sol.extrapolated);
  const Matrix& sp = sol.sigma_plus[0];
  EXPECT_EQ((sp - symmetrize(Matrix(xi * sol.sigma_minus[0] * xi.transpose()))).norm(), 0.0);
  EXPECT_EQ(numerical_rank(sp), 1);
  EXPECT_LE(std::abs(min_eigenvalue(sp)) / max_eigenvalue(sp), 1e-8);
  EXPECT_GT(sol.sigma_minus[0](0, 0), 0.0);
  EXPECT_EQ(sol.eta, 0.0);
  EXPECT_GT(sol.min_domain_margin, 0.0);
  EXPECT_GE(min_eigenvalue(sol.y.back()), 0.0);
  for (const auto& level : sol.levels) {
    const SdpVariables v{level.sigma_minus, level.w};
    EXPECT_NEAR(level.objective, objective_eval(v, p, level.eta),
                1e-9 * (1 + std::abs(level.objective)));
  }
}

TEST(SolveSdp, RegularizationLevelsAgree) {
  Rng rng(13);
  const LinearSegmentd seg1 = scalar_segment(0.2, 1.0, 0.0, 0.5, 1e-3);
  const LinearSegmentd seg2 = rng.segment(2, 0.5, 1.2, 1e-3, false);
  Matrix xi(2, 1);
  xi << 1.0, 1.0;
  SdpProblem p = chain_problem({seg1, seg2}, {xi}, Matrix::Constant(1, 1, 0.6), rng.spd(2), 0.7);
  p.options.extrapolate = false;
  p.options.eta_schedule = {1e-2, 1e-4};
  const SdpSolution a = solve_sdp(p);
  p.options.eta_schedule = {1e-2, 1e-4, 1e-6};
  const SdpSolution b = solve_sdp(p);
  EXPECT_LE(max_abs(a.sigma_minus[0] - b.sigma_minus[0]), 1e-4);
  // Extrapolation moves the answer by less than the last level spacing.
  p.options.extrapolate = true;
  const SdpSolution c = solve_sdp(p);
  EXPECT_LE(max_abs(c.sigma_minus[0] - b.sigma_minus[0]), 1e-5);
}

TEST(RecoverControllers, ForwardAndBackwardAgreeForNonsingularJump) {
  Rng rng(14);
  for (int trial = 0; trial < 4; ++trial) {
    const Eigen::Index n = rng.integer(1, 3);
    std::vector<LinearSegmentd> segs{rng.segment(n, 0.0, 0.5, 2e-3, false),
                                     rng.segment(n, 0.5, 1.0, 2e-3, false)};
    const std::vector<Matrix> xis{rng.invertible(n)};
    const Matrix sigma0 = rng.spd(n), sigma_t = rng.spd(n);
    const double eps = 0.5;
    const SdpSolution sol = solve_sdp(chain_problem(segs, xis, sigma0, sigma_t, eps));
    const auto plan = recover_controllers(sol, segs, xis, sigma0, sigma_t, eps);
    const auto forward = steer_smooth(segs[1], sol.sigma_plus[0], sigma_t, eps);
    for (std::size_t k = 0; k < forward.pi.size(); ++k) {
      EXPECT_LE((forward.pi[k] - plan.segments[1].pi[k]).norm(),
                1e-6 * std::max(1.0, forward.pi[k].norm()));
    }
    EXPECT_LE((plan.terminal_sigma() - sigma_t).norm() / sigma_t.norm(), 1e-6);
    EXPECT_LE((plan.segments[0].sigma.back() - sol.sigma_minus[0]).norm(), 1e-6);
    EXPECT_LE(pi_jump_residual(plan.jumps[0]), 1e-5);
  }
}

// Saltation matrix of the spring-mass hopper at liftoff (4 -> 5 states).
Matrix liftoff_saltation() {
  const HybridSystemSpec sys = slip();
  const double theta = std::atan2(0.9371, 0.3492);
  Vector x(4);
  x << theta, -1.1706939141556314, 1.0, 3.4789310797387114;
  return saltation_matrix(sys.mode(1), sys.mode(2), sys.transitions[0], 0.0, x, Vector::Zero(2),
                          Vector::Zero(3));
}

TEST(RecoverControllers, SingularPostJumpReachesTarget) {
  Rng rng(15);
  const Matrix xi = liftoff_saltation();
  ASSERT_EQ(xi.rows(), 5);
  ASSERT_EQ(xi.cols(), 4);
  std::vector<LinearSegmentd> segs{rng.segment(4, 0.0, 0.3, 2e-3, false),
                                   rng.segment(5, 0.3, 0.6, 2e-3, false)};
  const Matrix sigma0 = 0.1 * rng.spd(4), sigma_t = 0.1 * rng.spd(5);
  const double eps = 0.05;
  const SdpSolution sol = solve_sdp(chain_problem(segs, {xi}, sigma0, sigma_t, eps));
  const Matrix& sp = sol.sigma_plus[0];
  EXPECT_LE(std::abs(min_eigenvalue(sp)) / max_eigenvalue(sp), 1e-8);
  EXPECT_EQ(numerical_rank(sp), numerical_rank(xi));
  const auto plan = recover_controllers(sol, segs, {xi}, sigma0, sigma_t, eps);
  EXPECT_LE((plan.terminal_sigma() - sigma_t).norm() / sigma_t.norm(), 1e-6);
  EXPECT_LE((plan.segments[0].sigma.back() - sol.sigma_minus[0]).norm() /
                sol.sigma_minus[0].norm(),
            1e-6);
  EXPECT_TRUE(std::isfinite(pi_jump_residual(plan.jumps[0])));
}

TEST(Girsanov, ControlEnergyMatchesEndpointRelativeEntropy) {
  Rng rng(16);
  for (int trial = 0; trial < 6; ++trial) {
    const Eigen::Index n = rng.integer(1, 3);
    const LinearSegmentd seg = rng.segment(n, 0.0, 0.8, 1e-3, false);
    const Matrix sigma0 = rng.spd(n), sigma_t = rng.spd(n);
    const double eps = rng.uniform(0.3, 1.0);
    const auto sol = steer_smooth(seg, sigma0, sigma_t, eps);
    const PriorSegment prior = build_prior(seg);
    const Matrix cross = closed_loop_transition(seg, sol.pi) * sigma0;
    Matrix joint(2 * n, 2 * n);
    joint << sigma0, cross.transpose(), cross, sigma_t;
    const double kl = gaussian_kl(joint, joint_prior_covariance(prior, sigma0, eps));
    const double energy = control_energy(sol) / (2 * eps);
    EXPECT_NEAR(energy, kl, 1e-4 * std::abs(kl));
  }
}

TEST(SolveSdp, ChainsOfManyJumps) {
  Rng rng(17);
  const Eigen::Index n = 2;
  for (std::size_t jumps : {1u, 4u, 8u}) {
    std::vector<LinearSegmentd> segs;
    std::vector<Matrix> xis;
    for (std::size_t j = 0; j <= jumps; ++j) {
      segs.push_back(rng.segment(n, 0.2 * j, 0.2 * (j + 1), 1e-2, false));
      if (j < jumps) xis.push_back(rng.invertible(n));
    }
    const Matrix sigma0 = rng.spd(n), sigma_t = rng.spd(n);
    const SdpSolution sol = solve_sdp(chain_problem(segs, xis, sigma0, sigma_t, 0.5));
    const auto analytic = solve_hybrid_analytic(segs, xis, sigma0, sigma_t, 0.5);
    for (std::size_t j = 0; j < jumps; ++j) {
      EXPECT_LE(max_abs(analytic.jumps[j].sigma_minus - sol.sigma_minus[j]), 1e-6);
    }
  }
}

TEST(SdpProblem, ValidatesShapes) {
  Rng rng(18);
  const SdpProblem good = SdpProblem::two_segment(
      Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Identity(3, 3),
      Matrix::Identity(3, 3), Matrix::Ones(3, 2), Matrix::Identity(2, 2), Matrix::Identity(3, 3),
      1.0);
  EXPECT_NO_THROW(good.validate());
  EXPECT_TRUE(good.needs_regularization());
  SdpProblem bad = good;
  bad.xis[0] = Matrix::Ones(2, 3);
  try {
    bad.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

}  // namespace
}  // namespace hcs
