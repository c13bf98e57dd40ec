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

// Seeded generators for random linear and hybrid test instances.

#pragma once

#include <random>

#include "hcs/linalg.hpp"
#include "hcs/smooth_steering.hpp"

namespace hcs {

class RandomInstances {
 public:
  explicit RandomInstances(std::uint64_t seed) : gen_(seed) {}

  double normal() { return normal_(gen_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }

  Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * normal();
    return m;
  }

  /// L L' + floor * I with L ~ N(0, scale^2).
  Matrix spd(Eigen::Index n, double scale = 0.5, double floor = 0.3) {
    Matrix l = gaussian(n, n, scale);
    return symmetrize(Matrix(l * l.transpose() + floor * Matrix::Identity(n, n)));
  }

  /// Well-conditioned square matrix with singular values in [0.3, inf).
  Matrix invertible(Eigen::Index n, double spread = 0.4) {
    auto ok = [](const Matrix& m) {
      Eigen::JacobiSVD<Matrix> svd(m);
      return condition_number(m) <= 50.0 && svd.singularValues().minCoeff() >= 0.3;
    };
    Matrix m = Matrix::Identity(n, n) + gaussian(n, n, spread);
    while (!ok(m)) m = Matrix::Identity(n, n) + gaussian(n, n, spread);
    if (uniform(0, 1) < 0.5) m.row(0) *= -1.0;
    return m;
  }

  /// Linear segment on [t0, tf] with affine-in-time A, B and PSD Q.
  LinearSegmentd segment(Eigen::Index n, double t0, double tf, double dt, bool with_q = true,
                         bool time_varying = true) {
    Matrix a0 = gaussian(n, n, 0.5);
    Matrix a1 = time_varying ? gaussian(n, n, 0.3) : Matrix::Zero(n, n);
    Matrix b0 = Matrix::Identity(n, n) + gaussian(n, n, 0.3);
    Matrix b1 = time_varying ? gaussian(n, n, 0.2) : Matrix::Zero(n, n);
    Matrix lq = gaussian(n, n, 0.4);
    Matrix q0 = with_q ? Matrix(lq * lq.transpose()) : Matrix::Zero(n, n);
    LinearSegmentd seg = LinearSegmentd::constant(a0, b0, q0, t0, tf, dt);
    for (std::size_t k = 0; k < seg.node_count(); ++k) {
      const double s = (seg.times[k] - t0) / (tf - t0);
      seg.a[k] = a0 + s * a1;
      seg.b[k] = b0 + s * b1;
      seg.q[k] = q0 * (1.0 + 0.5 * s);
    }
    return seg;
  }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace hcs
