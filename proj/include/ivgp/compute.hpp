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

#ifndef IVGP_COMPUTE_HPP_
#define IVGP_COMPUTE_HPP_

// Data-parallel inner loops. The functions in ivgp::compute use OpenMP; the
// ones in ivgp::compute::serial compute the same result with plain loops and
// are kept as the reference the parallel versions are tested against.

#include <Eigen/Core>

namespace ivgp::compute {

enum class Stationary { SquaredExponential, Matern12, Matern32, Matern52 };

// variance * g(r) with r^2 = sum_d ((x_d - x2_d) / lengthscale_d)^2.
// `lengthscales` has one entry per column of X, or a single shared entry.
Eigen::MatrixXd stationary_gram(Stationary family, double variance,
                                const Eigen::VectorXd &lengthscales,
                                const Eigen::Ref<const Eigen::MatrixXd> &X,
                                const Eigen::Ref<const Eigen::MatrixXd> &X2);

// In-place lower Cholesky factor of a symmetric matrix; only the lower
// triangle of A is read. The strict upper triangle is zeroed on success.
// Returns false if a pivot is not strictly positive and finite.
bool cholesky_lower(Eigen::MatrixXd &A);

// Solves L X = B (or L^T X = B) for dense lower-triangular L, one right-hand
// side column per work item.
Eigen::MatrixXd lower_solve(const Eigen::Ref<const Eigen::MatrixXd> &L,
                            const Eigen::Ref<const Eigen::MatrixXd> &B,
                            bool transpose);

// Sums a (n1 * p1) x (n2 * p2) matrix over its p1 x p2 blocks, returning
// n1 x n2. Rows/cols of the input are ordered n * p_count + p.
Eigen::MatrixXd block_sum(const Eigen::Ref<const Eigen::MatrixXd> &M,
                          Eigen::Index p1, Eigen::Index p2);

namespace serial {

Eigen::MatrixXd stationary_gram(Stationary family, double variance,
                                const Eigen::VectorXd &lengthscales,
                                const Eigen::Ref<const Eigen::MatrixXd> &X,
                                const Eigen::Ref<const Eigen::MatrixXd> &X2);
bool cholesky_lower(Eigen::MatrixXd &A);
Eigen::MatrixXd lower_solve(const Eigen::Ref<const Eigen::MatrixXd> &L,
                            const Eigen::Ref<const Eigen::MatrixXd> &B,
                            bool transpose);
Eigen::MatrixXd block_sum(const Eigen::Ref<const Eigen::MatrixXd> &M,
                          Eigen::Index p1, Eigen::Index p2);

} // namespace serial

// Shared scalar profile g(r^2) used by both implementations.
double stationary_profile(Stationary family, double r2);

} // namespace ivgp::compute

#endif // IVGP_COMPUTE_HPP_
