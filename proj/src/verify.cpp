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

#include "hcs/verify.hpp"

#include <cmath>
#include <limits>

#include "hcs/experiment.hpp"
#include "hcs/instances.hpp"

namespace hcs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Worst {
  VerifyCheck check;
  Worst(std::string suite, std::string name, double tol) {
    check.suite = std::move(suite);
    check.name = std::move(name);
    check.tolerance = tol;
  }
  void add(double r) {
    ++check.instances;
    if (std::isnan(r) || std::isnan(check.residual)) {
      check.residual = std::numeric_limits<double>::quiet_NaN();
    } else {
      check.residual = std::max(check.residual, r);
    }
  }
};

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

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

void kernels(const VerifyOptions& opt, std::vector<VerifyCheck>& out) {
  RandomInstances rng(opt.seed);
  const char* letters = "abcdef";
  std::vector<Worst> ident;
  for (int i = 0; i < 6; ++i) {
    ident.emplace_back("kernels", std::string("identity-") + letters[i], 1e-8);
  }
  Worst product("kernels", "product-identities", 1e-8);
  Worst jump("kernels", "jump-composition-identities", 1e-8);
  Worst monotone("kernels", "ratio-monotone-across-jump", 1e-10);
  auto corrupt = [&](KernelBlocksd k) {
    if (opt.flip_phi12_sign) k.phi12 = -k.phi12;
    return k;
  };
  for (int trial = 0; trial < opt.instances; ++trial) {
    const Eigen::Index n = rng.integer(1, 4);
    const double t1 = rng.uniform(0.3, 1.0), t2 = t1 + rng.uniform(0.3, 1.0);
    const auto s1 = rng.segment(n, 0.0, t1, 2e-3);
    const auto s2 = rng.segment(n, t1, t2, 2e-3);
    const auto k1 = hamiltonian_kernel(s1, kInf);
    const auto k2 = hamiltonian_kernel(s2, kInf);
    const auto res = symplectic_residuals(corrupt(k1));
    for (int i = 0; i < 6; ++i) ident[std::size_t(i)].add(res[std::size_t(i)]);
    const Matrix prod = k2.full() * k1.full();
    product.add(max_symplectic_residual(corrupt(KernelBlocksd::from_full(prod, n, n))));
    const Matrix xi = rng.invertible(n);
    const Matrix through = k2.full() * jump_kernel<double>(xi).full() * k1.full();
    jump.add(max_symplectic_residual(corrupt(KernelBlocksd::from_full(through, n, n))));
    if (trial % 10 == 0) {
      // (Phi11)^-1 Phi12 never increases in the PSD order, jumps included.
      const auto path = hybrid_kernel_path<double>({s1, s2}, {xi});
      Matrix prev = Matrix::Zero(n, n);
      double worst = 0.0;
      for (std::size_t k = 1; k < path.size(); ++k) {
        auto b = corrupt(KernelBlocksd::from_full(path[k].second, n, n));
        const Matrix cur = b.phi11.lu().solve(b.phi12);
        worst = std::max(worst, -min_eigenvalue(Matrix(prev - cur)));
        prev = cur;
      }
      monotone.add(worst);
    }
  }
  for (auto& w : ident) out.push_back(w.check);
  out.push_back(product.check);
  out.push_back(jump.check);
  out.push_back(monotone.check);
}

void riccati(const VerifyOptions& opt, std::vector<VerifyCheck>& out) {
  RandomInstances rng(opt.seed + 1);
  Worst scalar("riccati", "scalar-closed-form", 1e-6);
  {
    const auto seg = LinearSegmentd::constant(Matrix::Zero(1, 1), Matrix::Identity(1, 1),
                                              Matrix::Zero(1, 1), 0.0, 1.0, 1e-3);
    const Matrix one = Matrix::Identity(1, 1);
    const auto sol = steer_smooth(seg, one, one, 1.0);
    scalar.add(std::abs(sol.pi.front()(0, 0) - (1.5 - std::sqrt(5.0) / 2.0)));
    scalar.add(std::abs(sol.sigma.back()(0, 0) - 1.0));
  }
  Worst smooth("riccati", "smooth-terminal-covariance", 1e-6);
  Worst coupling("riccati", "boundary-coupling", 1e-6);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = rng.integer(1, 4);
    const auto seg = rng.segment(n, 0.0, rng.uniform(0.5, 1.5), 2e-3, trial % 2 == 0);
    const Matrix s0 = rng.spd(n), st = rng.spd(n);
    const double eps = rng.uniform(0.2, 2.0);
    const auto sol = steer_smooth(seg, s0, st, eps);
    smooth.add(relative_error(sol.sigma.back(), st));
    for (std::size_t k : {std::size_t(0), sol.sigma.size() - 1}) {
      const Matrix c = eps * sol.sigma[k].inverse();
      coupling.add((c - sol.pi[k] - sol.h[k]).norm() / c.norm());
    }
  }
  Worst hybrid("riccati", "hybrid-terminal-covariance", 1e-6);
  Worst cov_jump("riccati", "jump-covariance", 1e-8);
  Worst pi_jump("riccati", "jump-riccati", 1e-6);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = rng.integer(1, 3);
    std::vector<LinearSegmentd> segs{rng.segment(n, 0.0, 0.5, 2e-3),
                                     rng.segment(n, 0.5, 1.0, 2e-3)};
    const std::vector<Matrix> xis{rng.invertible(n)};
    const Matrix s0 = rng.spd(n), st = rng.spd(n);
    const auto sol = solve_hybrid_analytic(segs, xis, s0, st, rng.uniform(0.3, 1.2));
    hybrid.add(relative_error(sol.terminal_sigma(), st));
    for (const auto& j : sol.jumps) {
      cov_jump.add((j.sigma_plus - j.xi * j.sigma_minus * j.xi.transpose()).norm() /
                   std::max(1.0, j.sigma_plus.norm()));
      pi_jump.add(pi_jump_residual(j));
    }
  }
  for (auto* w : {&scalar, &smooth, &coupling, &hybrid, &cov_jump, &pi_jump}) {
    out.push_back(w->check);
  }
}

void sdp(const VerifyOptions& opt, std::vector<VerifyCheck>& out) {
  RandomInstances rng(opt.seed + 2);
  Worst agree("sdp", "closed-form-agreement", 1e-3);
  Worst cov_jump("sdp", "jump-covariance", 1e-8);
  for (int trial = 0; trial < 6; ++trial) {
    const Eigen::Index n = rng.integer(1, 3);
    std::vector<LinearSegmentd> segs{rng.segment(n, 0.0, 0.5, 2e-3, false),
                                     rng.segment(n, 0.5, 1.0, 2e-3, false)};
    const std::vector<Matrix> xis{rng.invertible(n)};
    const Matrix s0 = rng.spd(n), st = rng.spd(n);
    const double eps = rng.uniform(0.3, 1.0);
    const auto analytic = solve_hybrid_analytic(segs, xis, s0, st, eps);
    const auto sol = solve_sdp(chain_problem(segs, xis, s0, st, eps));
    agree.add(std::max(max_abs(analytic.sigma_minus() - sol.sigma_minus[0]),
                       max_abs(analytic.sigma_plus() - sol.sigma_plus[0])));
    cov_jump.add(max_abs(sol.sigma_plus[0] - xis[0] * sol.sigma_minus[0] * xis[0].transpose()));
  }
  Worst ball("sdp", "bouncing-ball-agreement", 1e-3);
  {
    const Experiment ex = bouncing_ball_experiment();
    const auto a = run_steering(ex, SteeringMethod::kAnalytic);
    const auto s = steer_about(ex, a.nominal, SteeringMethod::kSdp);
    ball.add(std::max(max_abs(a.solution.sigma_minus() - s.solution.sigma_minus()),
                      max_abs(a.solution.sigma_plus() - s.solution.sigma_plus())));
  }
  Worst ratio("sdp", "singular-eigenvalue-ratio", 1e-8);
  Worst rank("sdp", "singular-rank-matches-saltation", 0.0);
  Worst eta("sdp", "eta-level-agreement", 1e-4);
  {
    const auto seg1 = LinearSegmentd::constant(Matrix::Constant(1, 1, -0.3), Matrix::Identity(1, 1),
                                               Matrix::Zero(1, 1), 0.0, 0.5, 1e-3);
    const auto seg2 = rng.segment(2, 0.5, 1.2, 1e-3, false);
    Matrix xi(2, 1);
    xi << 1.0, 1.0;
    SdpProblem p =
        chain_problem({seg1, seg2}, {xi}, Matrix::Constant(1, 1, 0.8), rng.spd(2), 0.5);
    const auto sol = solve_sdp(p);
    const Matrix& sp = sol.sigma_plus[0];
    ratio.add(std::abs(min_eigenvalue(sp)) / max_eigenvalue(sp));
    rank.add(std::abs(numerical_rank(sp) - numerical_rank(xi)));
    cov_jump.add(max_abs(sp - xi * sol.sigma_minus[0] * xi.transpose()));
    p.options.extrapolate = false;
    p.options.eta_schedule = {1e-2, 1e-4};
    const auto a = solve_sdp(p);
    p.options.eta_schedule = {1e-2, 1e-4, 1e-6};
    const auto b = solve_sdp(p);
    eta.add(max_abs(a.sigma_minus[0] - b.sigma_minus[0]));
  }
  Worst girsanov("sdp", "control-energy-vs-relative-entropy", 1e-4);
  for (int trial = 0; trial < 4; ++trial) {
    const Eigen::Index n = rng.integer(1, 3);
    const auto seg = rng.segment(n, 0.0, 0.8, 1e-3, false);
    const Matrix s0 = rng.spd(n), st = rng.spd(n);
    const double eps = rng.uniform(0.3, 1.0);
    const auto sol = steer_smooth(seg, s0, st, eps);
    const Matrix cross = closed_loop_transition(seg, sol.pi) * s0;
    Matrix joint(2 * n, 2 * n);
    joint << s0, cross.transpose(), cross, st;
    const double kl = gaussian_kl(joint, joint_prior_covariance(build_prior(seg), s0, eps));
    girsanov.add(std::abs(control_energy(sol) / (2 * eps) - kl) / std::abs(kl));
  }
  for (auto* w : {&agree, &ball, &cov_jump, &ratio, &rank, &eta, &girsanov}) {
    out.push_back(w->check);
  }
}

}  // namespace

std::vector<VerifyCheck> run_verify(const std::string& suite, const VerifyOptions& options) {
  if (suite != "kernels" && suite != "riccati" && suite != "sdp" && suite != "all") {
    throw Error(ErrorCode::kConfig, "unknown suite '" + suite + "'");
  }
  std::vector<VerifyCheck> out;
  if (suite == "kernels" || suite == "all") kernels(options, out);
  if (suite == "riccati" || suite == "all") riccati(options, out);
  if (suite == "sdp" || suite == "all") sdp(options, out);
  return out;
}

}  // namespace hcs
