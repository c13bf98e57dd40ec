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

// Small dense helpers shared by the steering solvers. Everything here is
// templated on the scalar through Eigen::MatrixBase so expressions can be
// passed without materializing them first.

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

#include "hcs/error.hpp"

namespace hcs {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

template <typename Derived>
typename Derived::PlainObject symmetrize(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

/// Symmetric square root via eigendecomposition of the symmetrized argument.
/// Eigenvalues in [-tol, 0) are clamped to zero; anything more negative
/// raises `nonpositive-sqrt-argument`.
template <typename Derived>
typename Derived::PlainObject sqrtm_psd(const Eigen::MatrixBase<Derived>& m,
                                        typename Derived::Scalar rel_tol = 1e-10) {
  using Scalar = typename Derived::Scalar;
  using Plain = typename Derived::PlainObject;
  Eigen::SelfAdjointEigenSolver<Plain> es(symmetrize(m));
  const auto& ev = es.eigenvalues();
  const Scalar scale = std::max<Scalar>(Scalar(1), ev.cwiseAbs().maxCoeff());
  Plain root_ev = Plain::Zero(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -rel_tol * scale) {
      throw Error(ErrorCode::kNonpositiveSqrtArgument,
                  "eigenvalue " + std::to_string(double(ev(i))));
    }
    root_ev(i, i) = std::sqrt(std::max<Scalar>(ev(i), Scalar(0)));
  }
  return symmetrize(es.eigenvectors() * root_ev * es.eigenvectors().transpose());
}

/// Inverse symmetric square root of a positive definite matrix.
template <typename Derived>
typename Derived::PlainObject inv_sqrtm_pd(const Eigen::MatrixBase<Derived>& m) {
  using Plain = typename Derived::PlainObject;
  Eigen::SelfAdjointEigenSolver<Plain> es(symmetrize(m));
  if (es.eigenvalues().minCoeff() <= 0) {
    throw Error(ErrorCode::kPsdViolation, "inverse square root of non-PD matrix");
  }
  Plain d = es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
  return symmetrize(es.eigenvectors() * d * es.eigenvectors().transpose());
}

template <typename Derived>
bool is_positive_definite(const Eigen::MatrixBase<Derived>& m) {
  Eigen::LLT<typename Derived::PlainObject> llt(symmetrize(m));
  return llt.info() == Eigen::Success;
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
  Eigen::SelfAdjointEigenSolver<typename Derived::PlainObject> es(
      symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

template <typename Derived>
typename Derived::Scalar max_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
  Eigen::SelfAdjointEigenSolver<typename Derived::PlainObject> es(
      symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

/// log det of a positive definite matrix through Cholesky. Returns NaN when
/// the factorization fails so callers can treat it as a domain test.
template <typename Derived>
typename Derived::Scalar logdet_pd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::LLT<typename Derived::PlainObject> llt(symmetrize(m));
  if (llt.info() != Eigen::Success) return std::numeric_limits<Scalar>::quiet_NaN();
  const auto& l = llt.matrixLLT();
  Scalar acc(0);
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > Scalar(0))) return std::numeric_limits<Scalar>::quiet_NaN();
    acc += std::log(l(i, i));
  }
  return Scalar(2) * acc;
}

/// Numerical rank from the singular values, relative threshold.
template <typename Derived>
Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& m,
                            typename Derived::Scalar rel_tol = 1e-10) {
  Eigen::JacobiSVD<typename Derived::PlainObject> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * sv(0)) ++r;
  }
  return r;
}

/// 2-norm condition number; infinity for rectangular or singular input.
template <typename Derived>
typename Derived::Scalar condition_number(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols() || m.rows() == 0) return std::numeric_limits<Scalar>::infinity();
  Eigen::JacobiSVD<typename Derived::PlainObject> svd(m);
  const auto& sv = svd.singularValues();
  const Scalar smallest = sv(sv.size() - 1);
  if (smallest <= Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  return sv(0) / smallest;
}

/// Relative Frobenius distance ||a - b|| / ||b||.
template <typename DA, typename DB>
typename DA::Scalar relative_error(const Eigen::MatrixBase<DA>& a,
                                   const Eigen::MatrixBase<DB>& b) {
  return (a - b).norm() / b.norm();
}

}  // namespace hcs
