// Copyright 2026 The ivgp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ivgp/compute.hpp"

#include <cmath>

namespace ivgp::compute {
namespace {

// Below this many inner operations a parallel region costs more than it saves.
constexpr Eigen::Index kParallelThreshold = 4096;

} // namespace

Eigen::MatrixXd stationary_gram(Stationary family, double variance,
                                const Eigen::VectorXd &lengthscales,
                                const Eigen::Ref<const Eigen::MatrixXd> &X,
                                const Eigen::Ref<const Eigen::MatrixXd> &X2) {
  const Eigen::Index n1 = X.rows();
  const Eigen::Index n2 = X2.rows();
  const Eigen::Index d = X.cols();
  Eigen::VectorXd inv_ls(d);
  for (Eigen::Index k = 0; k < d; ++k)
    inv_ls(k) = 1.0 / (lengthscales.size() == 1 ? lengthscales(0) : lengthscales(k));
  const Eigen::MatrixXd A = X * inv_ls.asDiagonal();
  const Eigen::MatrixXd B = X2 * inv_ls.asDiagonal();
  Eigen::MatrixXd K(n1, n2);
#pragma omp parallel for schedule(static) if (n1 * n2 * d > kParallelThreshold)
  for (Eigen::Index j = 0; j < n2; ++j) {
    for (Eigen::Index i = 0; i < n1; ++i) {
      double r2 = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = A(i, k) - B(j, k);
        r2 += diff * diff;
      }
      K(i, j) = variance * stationary_profile(family, r2);
    }
  }
  return K;
}

bool cholesky_lower(Eigen::MatrixXd &A) {
  const Eigen::Index n = A.rows();
  bool ok = true;
  for (Eigen::Index j = 0; j < n && ok; ++j) {
    double d = A(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= A(j, k) * A(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      ok = false;
      break;
    }
    const double ljj = std::sqrt(d);
    A(j, j) = ljj;
#pragma omp parallel for schedule(static) if ((n - j) * j > kParallelThreshold)
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= A(i, k) * A(j, k);
      A(i, j) = s / ljj;
    }
  }
  if (ok) A.triangularView<Eigen::StrictlyUpper>().setZero();
  return ok;
}

Eigen::MatrixXd lower_solve(const Eigen::Ref<const Eigen::MatrixXd> &L,
                            const Eigen::Ref<const Eigen::MatrixXd> &B,
                            bool transpose) {
  const Eigen::Index n = L.rows();
  const Eigen::Index cols = B.cols();
  Eigen::MatrixXd X = B;
#pragma omp parallel for schedule(static) if (cols * n * n > kParallelThreshold && cols > 1)
  for (Eigen::Index c = 0; c < cols; ++c) {
    if (!transpose) {
      for (Eigen::Index i = 0; i < n; ++i) {
        double s = X(i, c);
        for (Eigen::Index k = 0; k < i; ++k) s -= L(i, k) * X(k, c);
        X(i, c) = s / L(i, i);
      }
    } else {
      for (Eigen::Index i = n - 1; i >= 0; --i) {
        double s = X(i, c);
        for (Eigen::Index k = i + 1; k < n; ++k) s -= L(k, i) * X(k, c);
        X(i, c) = s / L(i, i);
      }
    }
  }
  return X;
}

Eigen::MatrixXd block_sum(const Eigen::Ref<const Eigen::MatrixXd> &M,
                          Eigen::Index p1, Eigen::Index p2) {
  const Eigen::Index n1 = M.rows() / p1;
  const Eigen::Index n2 = M.cols() / p2;
  Eigen::MatrixXd out(n1, n2);
#pragma omp parallel for schedule(static) if (M.size() > kParallelThreshold)
  for (Eigen::Index j = 0; j < n2; ++j) {
    for (Eigen::Index i = 0; i < n1; ++i) {
      double s = 0.0;
      for (Eigen::Index b = 0; b < p2; ++b)
        for (Eigen::Index a = 0; a < p1; ++a) s += M(i * p1 + a, j * p2 + b);
      out(i, j) = s;
    }
  }
  return out;
}

} // namespace ivgp::compute
