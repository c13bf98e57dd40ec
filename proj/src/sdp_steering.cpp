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

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cmath>
#include <limits>
#include <optional>

namespace hcs {

namespace {

// Pi between nodes: cubic Hermite midpoint with slopes from the Riccati rate.
class HermitePi {
 public:
  HermitePi(const LinearSegmentd& seg, const std::vector<Matrix>& pi) : seg_(seg), pi_(pi) {
    dot_.reserve(pi.size());
    for (std::size_t k = 0; k < pi.size(); ++k) {
      dot_.push_back(detail::pi_rate<double>(seg.a[k], seg.b[k], seg.q[k], pi[k]));
    }
  }
  Matrix at(std::size_t k, double th) const {
    if (th == 0.0) return pi_[k];
    if (th == 1.0) return pi_[k + 1];
    const double h = seg_.times[k + 1] - seg_.times[k];
    return 0.5 * (pi_[k] + pi_[k + 1]) + (h / 8.0) * (dot_[k] - dot_[k + 1]);
  }

 private:
  const LinearSegmentd& seg_;
  const std::vector<Matrix>& pi_;
  std::vector<Matrix> dot_;
};

Matrix spd_inverse(const Matrix& m) {
  Eigen::LLT<Matrix> llt(symmetrize(m));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kInfeasibleLogdetDomain, "matrix is not positive definite");
  }
  return symmetrize(Matrix(llt.solve(Matrix::Identity(m.rows(), m.cols()))));
}

// Coordinates of a symmetric matrix in the basis E_ii, E_ij = e_i e_j' + e_j e_i'.
Eigen::Index vech_size(Eigen::Index n) { return n * (n + 1) / 2; }

Matrix vech_basis(Eigen::Index n, Eigen::Index k) {
  Matrix e = Matrix::Zero(n, n);
  for (Eigen::Index i = 0, c = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j, ++c) {
      if (c == k) {
        e(i, j) = 1.0;
        e(j, i) = 1.0;
        return e;
      }
    }
  }
  return e;
}

void vech_put(const Matrix& m, Vector& out, Eigen::Index off) {
  for (Eigen::Index i = 0, c = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i; j < m.rows(); ++j, ++c) out(off + c) = m(i, j);
}

Matrix vech_get(const Vector& v, Eigen::Index off, Eigen::Index n) {
  Matrix m(n, n);
  for (Eigen::Index i = 0, c = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j, ++c) m(i, j) = m(j, i) = v(off + c);
  return m;
}

// <G, E_k> for every basis element.
void vech_inner(const Matrix& g, Vector& out, Eigen::Index off) {
  for (Eigen::Index i = 0, c = 0; i < g.rows(); ++i)
    for (Eigen::Index j = i; j < g.rows(); ++j, ++c)
      out(off + c) = i == j ? g(i, i) : g(i, j) + g(j, i);
}

// Scaled problem data and the variable layout
//   [V_0, Sigma-_0, V_1, Sigma-_1, ..., V_{K-1}].
//
// In reduced form every segment that follows a rank-deficient jump is written
// in an orthonormal basis Q = [U, U_perp] with U spanning the range of Xi.
// There Sigma+ + eta I = blockdiag(U'Xi Sigma- Xi'U + eta I, eta I), and the
// substitution W = V diag(1, sqrt(eta)) Q' turns W (Sigma+ + eta I)^-1 W' into
// V blockdiag((U'Xi Sigma- Xi'U + eta I)^-1, I) V'. Every level, eta = 0
// included, is then well conditioned. Otherwise V = W.
class Chain {
 public:
  Chain(const SdpProblem& p, double scale, double eta, bool reduced)
      : p_(p), scale_(scale), eta_(eta) {
    k_ = p.segments.size();
    eps_ = p.epsilon / scale;
    sigma0_ = p.sigma0 / scale;
    sigma_t_ = p.sigma_t / scale;
    Eigen::Index off = 0;
    for (std::size_t j = 0; j < k_; ++j) {
      const auto& seg = p.segments[j];
      const Eigen::Index n = seg.dim();
      Matrix q = Matrix::Identity(n, n);
      Vector cs = Vector::Ones(n);
      Vector add = Vector::Constant(n, eta);
      Eigen::Index r = n;
      if (j > 0) {
        const Matrix& xi = p.xis[j - 1];
        r = numerical_rank(xi);
        if (reduced && r < n) {
          q = Eigen::JacobiSVD<Matrix>(xi, Eigen::ComputeFullU).matrixU();
          cs.tail(n - r).setConstant(std::sqrt(eta));
          add.tail(n - r).setOnes();
        } else {
          r = n;
        }
        Matrix sx = q.transpose() * xi;
        sx.bottomRows(n - r).setZero();
        start_xi_.push_back(sx);
      } else {
        start_xi_.push_back(Matrix());
      }
      const Matrix s_inv = spd_inverse(seg.gramian);
      s_inv_.push_back(s_inv);
      Matrix m = seg.phi.transpose() * s_inv * seg.phi;
      if (j > 0 && p.options.state_cost_coupling && !seg.pi_hat.empty()) m += seg.pi_hat.front();
      Matrix mq = symmetrize(Matrix(q.transpose() * m * q));
      double c = 0.0;
      if (r < n) {
        c = eta * mq.bottomRightCorner(n - r, n - r).trace() / eps_;
        mq.bottomRows(n - r).setZero();
        mq.rightCols(n - r).setZero();
      }
      m_.push_back(mq);
      const_.push_back(c);
      q_.push_back(q);
      col_scale_.push_back(cs);
      start_add_.push_back(add);
      lin_.push_back(Matrix(s_inv * seg.phi * q * cs.asDiagonal()));  // d/dV of tr(Phi'S^-1 W)
      w_off_.push_back(off);
      off += n * n;
      if (j + 1 < k_) {
        s_off_.push_back(off);
        off += vech_size(n);
      }
    }
    size_ = off;
  }

  Eigen::Index size() const { return size_; }
  Eigen::Index dim(std::size_t j) const { return p_.segments[j].dim(); }

  // Original-coordinate cross-covariance from V and back.
  Matrix to_w(const Matrix& v, std::size_t j) const {
    return v * col_scale_[j].asDiagonal() * q_[j].transpose();
  }
  Matrix to_v(const Matrix& w, std::size_t j) const {
    Matrix v = w * q_[j];
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      const double s = col_scale_[j](c);
      v.col(c) = s > 0.0 ? Vector(v.col(c) / s) : Vector(Vector::Zero(v.rows()));
    }
    return v;
  }

  Vector pack(const SdpVariables& v) const {
    Vector x(size_);
    for (std::size_t j = 0; j < k_; ++j) {
      const Eigen::Index n = dim(j);
      const Matrix vj = to_v(v.w[j] / scale_, j);
      x.segment(w_off_[j], n * n) = Eigen::Map<const Vector>(vj.data(), n * n);
      if (j + 1 < k_) vech_put(v.sigma_minus[j] / scale_, x, s_off_[j]);
    }
    return x;
  }

  SdpVariables unpack(const Vector& x) const {
    SdpVariables v;
    for (std::size_t j = 0; j < k_; ++j) {
      const Eigen::Index n = dim(j);
      v.w.push_back(to_w(Eigen::Map<const Matrix>(x.data() + w_off_[j], n, n), j) * scale_);
      if (j + 1 < k_) v.sigma_minus.push_back(vech_get(x, s_off_[j], n) * scale_);
    }
    return v;
  }

  struct Local {
    Matrix ss, se, w, p, c, d;
    double f = 0.0;
  };

  // Segment terms at x; nullopt outside the domain.
  std::optional<Local> local(const Vector& x, std::size_t j) const {
    const Eigen::Index n = dim(j);
    Local l;
    if (j == 0) {
      l.ss = sigma0_;
    } else {
      const Matrix prev = vech_get(x, s_off_[j - 1], dim(j - 1));
      l.ss = symmetrize(Matrix(start_xi_[j] * prev * start_xi_[j].transpose()));
      l.ss.diagonal() += start_add_[j];
    }
    l.se = j + 1 < k_ ? vech_get(x, s_off_[j], n) : sigma_t_;
    l.w = Eigen::Map<const Matrix>(x.data() + w_off_[j], n, n);
    Eigen::LLT<Matrix> lls(l.ss);
    if (lls.info() != Eigen::Success) return std::nullopt;
    l.p = symmetrize(Matrix(lls.solve(Matrix::Identity(n, n))));
    l.c = symmetrize(Matrix(l.se - l.w * l.p * l.w.transpose()));
    Eigen::LLT<Matrix> llc(l.c);
    if (llc.info() != Eigen::Success) return std::nullopt;
    const double ld = logdet_pd(l.c);
    if (!std::isfinite(ld)) return std::nullopt;
    l.d = symmetrize(Matrix(llc.solve(Matrix::Identity(n, n))));
    l.f = ((s_inv_[j] * l.se).trace() + (m_[j] * l.ss).trace() -
           2.0 * (lin_[j].cwiseProduct(l.w)).sum()) /
              eps_ +
          const_[j] - ld;
    return l;
  }

  double dropped_constant() const {
    return (m_.front() * sigma0_).trace() / eps_ + (s_inv_.back() * sigma_t_).trace() / eps_;
  }

  // Objective in scaled units without the two constant traces.
  std::optional<double> value(const Vector& x) const {
    double f = 0.0;
    for (std::size_t j = 0; j < k_; ++j) {
      auto l = local(x, j);
      if (!l) return std::nullopt;
      f += l->f;
    }
    return f - dropped_constant();
  }

  // Scaling Sigma and eps by 1/c shifts every log-det by n log c.
  double unscaled(double f) const {
    double shift = 0.0;
    for (std::size_t j = 0; j < k_; ++j) shift += double(dim(j)) * std::log(scale_);
    return f - shift;
  }

  double min_margin(const Vector& x) const {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k_; ++j) {
      auto l = local(x, j);
      if (!l) return -1.0;
      worst = std::min(worst, min_eigenvalue(l->c));
    }
    return worst * scale_;
  }

  struct Derivs {
    double f = 0.0;
    Vector g;
    Eigen::SparseMatrix<double> h;
  };

  std::optional<Derivs> derivatives(const Vector& x) const {
    Derivs out;
    out.g = Vector::Zero(size_);
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t j = 0; j < k_; ++j) {
      auto lo = local(x, j);
      if (!lo) return std::nullopt;
      const Local& l = *lo;
      out.f += l.f;
      const Eigen::Index n = dim(j);
      const Matrix dwp = l.d * l.w * l.p;
      const Matrix pwdwp = l.p * l.w.transpose() * dwp;
      const Matrix g_e = s_inv_[j] / eps_ - l.d;
      const Matrix g_w = 2.0 * dwp - 2.0 * lin_[j] / eps_;
      const Matrix g_s = m_[j] / eps_ - pwdwp;

      // Local coordinates: [Sigma-_{j-1}] [V_j] [Sigma-_j].
      const bool has_s = j > 0;
      const bool has_e = j + 1 < k_;
      const Eigen::Index ns = has_s ? vech_size(dim(j - 1)) : 0;
      const Eigen::Index nw = n * n;
      const Eigen::Index ne = has_e ? vech_size(n) : 0;
      std::vector<Eigen::Index> gidx;
      for (Eigen::Index i = 0; i < ns; ++i) gidx.push_back(s_off_[j - 1] + i);
      for (Eigen::Index i = 0; i < nw; ++i) gidx.push_back(w_off_[j] + i);
      for (Eigen::Index i = 0; i < ne; ++i) gidx.push_back(s_off_[j] + i);
      const Eigen::Index nl = ns + nw + ne;
      const Matrix& xi = start_xi_[j];

      auto project = [&](const Matrix& gs, const Matrix& gw, const Matrix& ge, Vector& v) {
        v.resize(nl);
        if (has_s) vech_inner(Matrix(xi.transpose() * gs * xi), v, 0);
        v.segment(ns, nw) = Eigen::Map<const Vector>(gw.data(), nw);
        if (has_e) vech_inner(ge, v, ns + nw);
      };

      Vector gl;
      project(g_s, g_w, g_e, gl);
      for (Eigen::Index i = 0; i < nl; ++i) out.g(gidx[i]) += gl(i);

      Vector col;
      for (Eigen::Index c = 0; c < nl; ++c) {
        Matrix a = Matrix::Zero(n, n), b = Matrix::Zero(n, n), e = Matrix::Zero(n, n);
        if (c < ns) {
          a = xi * vech_basis(dim(j - 1), c) * xi.transpose();
        } else if (c < ns + nw) {
          b(c - ns) = 1.0;
        } else {
          e = vech_basis(n, c - ns - nw);
        }
        const Matrix dp = -l.p * a * l.p;
        const Matrix bpw = b * l.p * l.w.transpose();
        const Matrix dc = e - bpw - bpw.transpose() - l.w * dp * l.w.transpose();
        const Matrix dd = -l.d * dc * l.d;
        const Matrix dg_e = -dd;
        const Matrix dg_w = 2.0 * (dd * l.w * l.p + l.d * b * l.p + l.d * l.w * dp);
        const Matrix t1 = dp * l.w.transpose() * dwp;
        const Matrix t2 = l.p * b.transpose() * dwp;
        const Matrix dg_s =
            -(t1 + t1.transpose() + t2 + t2.transpose() + l.p * l.w.transpose() * dd * l.w * l.p);
        project(dg_s, dg_w, dg_e, col);
        for (Eigen::Index r = 0; r < nl; ++r) {
          if (col(r) != 0.0) trip.emplace_back(gidx[r], gidx[c], col(r));
        }
      }
    }
    out.f -= dropped_constant();
    out.h.resize(size_, size_);
    out.h.setFromTriplets(trip.begin(), trip.end());
    return out;
  }

  // Prior-induced start with W contracted by rho.
  Vector initial(double rho) const {
    Vector x = Vector::Zero(size_);
    Matrix ss = sigma0_;
    for (std::size_t j = 0; j < k_; ++j) {
      const auto& seg = p_.segments[j];
      const Eigen::Index n = dim(j);
      const Matrix v = to_v(Matrix(rho * seg.phi * ss), j);
      Eigen::Map<Matrix>(x.data() + w_off_[j], n, n) = v;
      if (j + 1 < k_) {
        const Matrix se =
            symmetrize(Matrix(seg.phi * ss * seg.phi.transpose() + eps_ * seg.gramian));
        vech_put(se, x, s_off_[j]);
        ss = symmetrize(Matrix(p_.xis[j] * se * p_.xis[j].transpose()));
        ss.diagonal().array() += eta_;
      }
    }
    return x;
  }

  // Halves every V until the point is inside the domain.
  bool make_feasible(Vector& x) const {
    for (int it = 0; it < 80; ++it) {
      if (value(x)) return true;
      for (std::size_t j = 0; j < k_; ++j) {
        const Eigen::Index n = dim(j);
        x.segment(w_off_[j], n * n) *= 0.5;
      }
    }
    return false;
  }

 private:
  const SdpProblem& p_;
  double scale_;
  double eta_;
  std::size_t k_ = 0;
  double eps_ = 1.0;
  Matrix sigma0_, sigma_t_;
  std::vector<Matrix> s_inv_, m_, lin_, q_, start_xi_;
  std::vector<Vector> col_scale_, start_add_;
  std::vector<double> const_;
  std::vector<Eigen::Index> w_off_, s_off_;
  Eigen::Index size_ = 0;
};

struct LevelResult {
  Vector x;
  double f = 0.0;
  double gnorm = 0.0;
  int iterations = 0;
};

LevelResult newton(const Chain& chain, Vector x, const SdpOptions& opt) {
  LevelResult r;
  for (int it = 0;; ++it) {
    auto d = chain.derivatives(x);
    if (!d) throw Error(ErrorCode::kInfeasible, "iterate left the log-det domain");
    r.x = x;
    r.f = d->f;
    r.gnorm = d->g.norm();
    r.iterations = it;
    if (r.gnorm <= opt.tolerance * (1.0 + std::abs(d->f))) return r;
    if (it >= opt.max_iterations) {
      throw Error(ErrorCode::kMaxIterations,
                  "gradient norm " + std::to_string(r.gnorm) + " after " + std::to_string(it));
    }

    // Newton direction; Levenberg shift if the factorization is not PD.
    Vector step;
    double shift = 0.0;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::SparseMatrix<double> h = d->h;
      if (shift > 0.0) {
        for (Eigen::Index i = 0; i < h.rows(); ++i) h.coeffRef(i, i) += shift;
      }
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(h);
      if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0) {
        step = ldlt.solve(-d->g);
        if (step.allFinite()) break;
      }
      shift = shift == 0.0 ? 1e-10 * std::max(1.0, d->h.diagonal().cwiseAbs().maxCoeff())
                           : 10.0 * shift;
      step.resize(0);
    }
    if (step.size() == 0) step = -d->g;
    double slope = d->g.dot(step);
    if (!(slope < 0.0)) {
      step = -d->g;
      slope = -d->g.squaredNorm();
    }
    // Decrement below rounding of f: nothing left to gain.
    if (-slope <= 1e-15 * (1.0 + std::abs(d->f))) return r;

    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      const Vector trial = x + alpha * step;
      auto f = chain.value(trial);
      if (f && *f <= d->f + 1e-4 * alpha * slope) {
        x = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (r.gnorm <= 1e-6 * (1.0 + std::abs(d->f))) return r;  // rounding floor
      throw Error(ErrorCode::kMaxIterations, "line search failed at gradient norm " +
                                                 std::to_string(r.gnorm));
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Priors

PriorSegment build_prior(const LinearSegmentd& seg) {
  seg.validate();
  const Eigen::Index n = seg.state_dim();
  PriorSegment prior;
  prior.times = seg.times;
  prior.pi_hat = riccati_integrate(Matrix(Matrix::Zero(n, n)), seg, Direction::kReverse);
  HermitePi pi(seg, prior.pi_hat);
  // S solves dS/dt = A_hat S + S A_hat' + BB' from zero.
  auto rhs_lyap = [&](std::size_t k, double th, const Matrix& y) -> Matrix {
    const Matrix b = seg.b_at(k, th);
    const Matrix a_hat = seg.a_at(k, th) - b * b.transpose() * pi.at(k, th);
    Matrix out(n, 2 * n);
    out.leftCols(n) = a_hat * y.leftCols(n);
    const Matrix s = y.rightCols(n);
    out.rightCols(n) = a_hat * s + s * a_hat.transpose() + b * b.transpose();
    return out;
  };
  Matrix y(n, 2 * n);
  y << Matrix::Identity(n, n), Matrix::Zero(n, n);
  for (std::size_t k = 0; k + 1 < seg.node_count(); ++k) {
    y = detail::rk4_step<double>(rhs_lyap, k, seg.times[k + 1] - seg.times[k], y, true);
    y.rightCols(n) = symmetrize(Matrix(y.rightCols(n)));
  }
  prior.phi = y.leftCols(n);
  prior.gramian = y.rightCols(n);
  const double hi = max_eigenvalue(prior.gramian);
  const double lo = min_eigenvalue(prior.gramian);
  if (!(lo > 1e-12 * hi)) {
    throw Error(ErrorCode::kGramianSingular,
                "lambda_min/lambda_max = " + std::to_string(lo / std::max(hi, 1e-300)));
  }
  return prior;
}

PriorSegment prior_from_blocks(const Matrix& phi, const Matrix& gramian) {
  if (phi.rows() != phi.cols() || gramian.rows() != phi.rows() || gramian.cols() != phi.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "prior blocks");
  }
  PriorSegment p;
  p.phi = phi;
  p.gramian = symmetrize(gramian);
  return p;
}

Matrix joint_prior_covariance(const PriorSegment& prior, const Matrix& sigma_start, double eps) {
  const Eigen::Index n = prior.dim();
  Matrix out(2 * n, 2 * n);
  const Matrix cross = prior.phi * sigma_start;
  out.topLeftCorner(n, n) = sigma_start;
  out.topRightCorner(n, n) = cross.transpose();
  out.bottomLeftCorner(n, n) = cross;
  out.bottomRightCorner(n, n) =
      symmetrize(Matrix(cross * prior.phi.transpose() + eps * prior.gramian));
  return out;
}

// ---------------------------------------------------------------------------
// Problem

bool SdpProblem::needs_regularization() const {
  for (const auto& xi : xis) {
    if (numerical_rank(xi) < xi.rows()) return true;
  }
  return false;
}

double SdpProblem::covariance_scale() const {
  return 0.5 * (sigma0.trace() / double(sigma0.rows()) + sigma_t.trace() / double(sigma_t.rows()));
}

void SdpProblem::validate() const {
  if (segments.empty() || xis.size() + 1 != segments.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "need one jump between consecutive segments");
  }
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kConfig, "epsilon must be positive");
  if (sigma0.rows() != segments.front().dim() || sigma_t.rows() != segments.back().dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "boundary covariance sizes");
  }
  if (!is_positive_definite(sigma0) || !is_positive_definite(sigma_t)) {
    throw Error(ErrorCode::kPsdViolation, "boundary covariances must be positive definite");
  }
  for (std::size_t j = 0; j < xis.size(); ++j) {
    if (xis[j].cols() != segments[j].dim() || xis[j].rows() != segments[j + 1].dim()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "jump " + std::to_string(j) + " maps " + std::to_string(xis[j].cols()) +
                      " -> " + std::to_string(xis[j].rows()));
    }
  }
  for (const auto& s : segments) {
    if (!is_positive_definite(s.gramian)) {
      throw Error(ErrorCode::kGramianSingular, "segment Gramian is not positive definite");
    }
  }
}

SdpProblem SdpProblem::two_segment(const Matrix& s1, const Matrix& phi1, const Matrix& s2,
                                   const Matrix& phi2, const Matrix& xi, const Matrix& sigma0,
                                   const Matrix& sigma_t, double eps) {
  SdpProblem p;
  p.segments = {prior_from_blocks(phi1, s1), prior_from_blocks(phi2, s2)};
  p.xis = {xi};
  p.sigma0 = sigma0;
  p.sigma_t = sigma_t;
  p.epsilon = eps;
  return p;
}

double objective_eval(const SdpVariables& v, const SdpProblem& p, double eta) {
  p.validate();
  if (v.sigma_minus.size() != p.xis.size() || v.w.size() != p.segments.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "candidate size");
  }
  Chain chain(p, 1.0, eta, false);
  auto f = chain.value(chain.pack(v));
  if (!f) throw Error(ErrorCode::kInfeasibleLogdetDomain, "candidate outside the domain");
  return *f;
}

double objective_constant(const SdpProblem& p) {
  double c = 0.0;
  const auto& first = p.segments.front();
  const auto& last = p.segments.back();
  c += (first.phi.transpose() * spd_inverse(first.gramian) * first.phi * p.sigma0).trace() /
       p.epsilon;
  c += (spd_inverse(last.gramian) * p.sigma_t).trace() / p.epsilon;
  for (const auto& s : p.segments) {
    c += logdet_pd(Matrix(p.epsilon * s.gramian)) - double(s.dim());
  }
  return c;
}

double gaussian_kl(const Matrix& p, const Matrix& q) {
  const double lq = logdet_pd(q), lp = logdet_pd(p);
  if (!std::isfinite(lq) || !std::isfinite(lp)) {
    throw Error(ErrorCode::kInfeasibleLogdetDomain, "KL of a singular Gaussian");
  }
  return 0.5 * (lq - lp + q.llt().solve(p).trace() - double(p.rows()));
}

double kl_objective(const SdpVariables& v, const SdpProblem& p, double eta) {
  double total = 0.0;
  Matrix ss = p.sigma0;
  for (std::size_t j = 0; j < p.segments.size(); ++j) {
    const Eigen::Index n = p.segments[j].dim();
    const Matrix se = j + 1 < p.segments.size() ? v.sigma_minus[j] : p.sigma_t;
    Matrix joint(2 * n, 2 * n);
    joint << ss, v.w[j].transpose(), v.w[j], se;
    total += gaussian_kl(joint, joint_prior_covariance(p.segments[j], ss, p.epsilon));
    if (j + 1 < p.segments.size()) {
      ss = symmetrize(Matrix(p.xis[j] * se * p.xis[j].transpose()));
      ss.diagonal().array() += eta;
    }
  }
  return total;
}

SdpVariables prior_variables(const SdpProblem& p, double rho, double eta) {
  Chain chain(p, 1.0, eta, false);
  Vector x = chain.initial(rho);
  for (int it = 0; it < 60 && !chain.value(x); ++it) {
    rho *= 0.5;
    x = chain.initial(rho);
  }
  return chain.unpack(x);
}

// ---------------------------------------------------------------------------
// Solver

namespace {

struct Stage {
  Vector x;
  SdpVariables v;
  LevelResult r;
};

// Solves one regularization level (relative eta) from `warm` or the prior.
Stage solve_level(const SdpProblem& p, double scale, double eta, const SdpVariables* warm) {
  const Chain chain(p, scale, eta, true);
  Vector x;
  if (warm) {
    x = chain.pack(*warm);
  } else {
    double rho = p.options.rho;
    x = chain.initial(rho);
    while (!chain.value(x) && rho > 1e-12) {
      rho *= 0.5;
      x = chain.initial(rho);
    }
  }
  if (!chain.make_feasible(x)) {
    throw Error(ErrorCode::kInfeasible,
                "no strictly feasible start at eta " + std::to_string(eta * scale));
  }
  Stage st;
  st.r = newton(chain, x, p.options);
  st.r.f = chain.unscaled(st.r.f);
  st.x = st.r.x;
  st.v = chain.unpack(st.x);
  return st;
}

SdpVariables extrapolate_to_zero(const SdpVariables& a, double ea, const SdpVariables& b,
                                 double eb) {
  // Linear in eta through (ea, a) and (eb, b), evaluated at zero.
  const double t = eb / (ea - eb);
  SdpVariables out = b;
  for (std::size_t i = 0; i < b.sigma_minus.size(); ++i)
    out.sigma_minus[i] = b.sigma_minus[i] + t * (b.sigma_minus[i] - a.sigma_minus[i]);
  for (std::size_t i = 0; i < b.w.size(); ++i) out.w[i] = b.w[i] + t * (b.w[i] - a.w[i]);
  return out;
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& p) {
  p.validate();
  const double scale = p.covariance_scale();
  const SdpOptions& opt = p.options;

  std::vector<double> etas{0.0};
  if (p.needs_regularization()) {
    etas = opt.eta_schedule;
    if (etas.empty()) throw Error(ErrorCode::kConfig, "empty eta schedule for a singular jump");
  }

  SdpSolution sol;
  std::vector<SdpVariables> level_v;
  Stage last;
  for (std::size_t li = 0; li < etas.size(); ++li) {
    last = solve_level(p, scale, etas[li], li == 0 ? nullptr : &level_v.back());
    level_v.push_back(last.v);
    SdpLevel level;
    level.eta = etas[li] * scale;
    level.iterations = last.r.iterations;
    level.gradient_norm = last.r.gnorm;
    level.objective = last.r.f;
    level.sigma_minus = last.v.sigma_minus;
    level.w = last.v.w;
    sol.levels.push_back(level);
    sol.iterations += last.r.iterations;
  }
  double eta_final = etas.back();

  // The eta -> 0 limit, warm-started from the extrapolated levels.
  if (p.needs_regularization() && opt.extrapolate) {
    SdpVariables warm = level_v.back();
    if (etas.size() >= 2) {
      SdpVariables guess = extrapolate_to_zero(level_v[level_v.size() - 2], etas[etas.size() - 2],
                                               level_v.back(), etas.back());
      bool ok = true;
      for (const auto& s : guess.sigma_minus) ok = ok && is_positive_definite(s);
      const Chain limit(p, scale, 0.0, true);
      if (ok && limit.value(limit.pack(guess))) warm = guess;
    }
    last = solve_level(p, scale, 0.0, &warm);
    sol.iterations += last.r.iterations;
    sol.extrapolated = true;
    eta_final = 0.0;
  }

  const Chain chain(p, scale, eta_final, true);
  const SdpVariables& v = last.v;
  sol.sigma_minus = v.sigma_minus;
  sol.w = v.w;
  for (std::size_t j = 0; j < p.xis.size(); ++j) {
    sol.sigma_minus[j] = symmetrize(sol.sigma_minus[j]);
    sol.sigma_plus.push_back(
        symmetrize(Matrix(p.xis[j] * sol.sigma_minus[j] * p.xis[j].transpose())));
  }
  sol.eta = eta_final * scale;
  sol.objective = last.r.f;
  sol.gradient_norm = last.r.gnorm;
  sol.min_domain_margin = chain.min_margin(last.x);

  Matrix ss = p.sigma0;
  for (std::size_t j = 0; j < p.segments.size(); ++j) {
    const Eigen::Index n = p.segments[j].dim();
    if (j + 1 < p.segments.size()) {
      Matrix joint(2 * n, 2 * n);
      joint << ss, sol.w[j].transpose(), sol.w[j], sol.sigma_minus[j];
      sol.y.push_back(joint);
      ss = sol.sigma_plus[j];
    } else {
      sol.y.push_back(Matrix(chain.local(last.x, j)->c * scale));
    }
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Controllers

HybridSteeringSolutiond recover_controllers(const SdpSolution& sol,
                                            const std::vector<LinearSegmentd>& segments,
                                            const std::vector<Matrix>& xis, const Matrix& sigma0,
                                            const Matrix& sigma_t, double eps) {
  if (segments.size() != xis.size() + 1 || sol.sigma_minus.size() != xis.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "segments, jumps and solution disagree");
  }
  HybridSteeringSolutiond out;
  for (std::size_t j = 0; j < segments.size(); ++j) {
    const Matrix target = j + 1 < segments.size() ? sol.sigma_minus[j] : sigma_t;
    SteeringSolutiond s = j == 0 ? steer_smooth(segments[j], sigma0, target, eps)
                                 : steer_smooth_terminal(segments[j], sol.sigma_plus[j - 1],
                                                         target, eps);
    out.cost += segment_cost(s, segments[j]);
    out.segments.push_back(std::move(s));
  }
  for (std::size_t j = 0; j < xis.size(); ++j) {
    JumpRecord<double> rec;
    rec.time = segments[j].tf();
    rec.xi = xis[j];
    rec.sigma_minus = out.segments[j].sigma.back();
    rec.sigma_plus = sol.sigma_plus[j];
    rec.pi_minus = out.segments[j].pi.back();
    rec.pi_plus = out.segments[j + 1].pi.front();
    out.jumps.push_back(std::move(rec));
  }
  return out;
}

Matrix closed_loop_transition(const LinearSegmentd& seg, const std::vector<Matrix>& pi) {
  if (pi.size() != seg.node_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "Pi schedule length");
  }
  HermitePi hp(seg, pi);
  auto rhs = [&](std::size_t k, double th, const Matrix& phi) -> Matrix {
    const Matrix b = seg.b_at(k, th);
    return (seg.a_at(k, th) - b * b.transpose() * hp.at(k, th)) * phi;
  };
  Matrix phi = Matrix::Identity(seg.state_dim(), seg.state_dim());
  for (std::size_t k = 0; k + 1 < seg.node_count(); ++k) {
    phi = detail::rk4_step<double>(rhs, k, seg.times[k + 1] - seg.times[k], phi, true);
  }
  return phi;
}

double control_energy(const SteeringSolutiond& sol) {
  double acc = 0.0;
  auto f = [&](std::size_t k) {
    return (sol.gain[k] * sol.sigma[k] * sol.gain[k].transpose()).trace();
  };
  for (std::size_t k = 0; k + 1 < sol.times.size(); ++k) {
    acc += 0.5 * (sol.times[k + 1] - sol.times[k]) * (f(k) + f(k + 1));
  }
  return acc;
}

}  // namespace hcs
