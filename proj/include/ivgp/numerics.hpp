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

#ifndef IVGP_NUMERICS_HPP_
#define IVGP_NUMERICS_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "ivgp/errors.hpp"

namespace ivgp {

/*
 * Element order.
 *
 * DenseMatrix is an Eigen column-major matrix: element (i, j) lives at
 * i + j * rows. Higher-rank covariance arrays use ivgp::Tensor, which is C
 * ordered (see tensor.hpp). Stacked vectors such as q_mu use the order given
 * where they are defined (m * P + p for output-stacked inducing variables,
 * l * M + m for latent-stacked ones).
 */
using DenseMatrix = Eigen::MatrixXd;

// Lower-triangular matrix stored as packed columns: column j holds rows
// j..dim-1 contiguously.
class LowerTriangular {
public:
  LowerTriangular() = default;
  explicit LowerTriangular(Eigen::Index dim)
      : dim_(dim), packed_(static_cast<std::size_t>(packed_size(dim)), 0.0) {}

  static LowerTriangular identity(Eigen::Index dim);
  // Copies the lower triangle of `m`; the strict upper part is ignored.
  static LowerTriangular from_dense(const Eigen::Ref<const Eigen::MatrixXd> &m);
  static LowerTriangular from_packed(Eigen::Index dim, std::vector<double> packed);

  Eigen::Index dim() const { return dim_; }

  double operator()(Eigen::Index i, Eigen::Index j) const {
    return i < j ? 0.0 : packed_[index(i, j)];
  }
  double &at(Eigen::Index i, Eigen::Index j);

  Eigen::MatrixXd dense() const;
  Eigen::VectorXd diagonal() const;

  std::span<double> packed() { return packed_; }
  std::span<const double> packed() const { return packed_; }

  static Eigen::Index packed_size(Eigen::Index dim) { return dim * (dim + 1) / 2; }
  static Eigen::Index diagonal_position(Eigen::Index j, Eigen::Index dim) {
    return j * dim - j * (j - 1) / 2;
  }

  bool operator==(const LowerTriangular &other) const = default;

private:
  std::size_t index(Eigen::Index i, Eigen::Index j) const {
    return static_cast<std::size_t>(diagonal_position(j, dim_) + (i - j));
  }

  Eigen::Index dim_ = 0;
  std::vector<double> packed_;
};

// A symmetric positive definite matrix with exploitable structure.
class StructuredPSD {
public:
  struct Dense {
    Eigen::MatrixXd matrix;
  };
  // `blocks` holds either one entry per block or a single entry shared by all
  // `num_blocks` blocks.
  struct BlockDiagonal {
    std::vector<Eigen::MatrixXd> blocks;
    Eigen::Index num_blocks = 0;
  };
  // diag(alpha) + beta * beta^T
  struct DiagPlusLowRank {
    Eigen::VectorXd diag;
    Eigen::MatrixXd factor;
  };
  using Variant = std::variant<Dense, BlockDiagonal, DiagPlusLowRank>;

  StructuredPSD() = default;

  static StructuredPSD dense(Eigen::MatrixXd matrix);
  static StructuredPSD block_diagonal(std::vector<Eigen::MatrixXd> blocks);
  static StructuredPSD shared_blocks(Eigen::MatrixXd block, Eigen::Index count);
  static StructuredPSD diag_plus_low_rank(Eigen::VectorXd diag,
                                          Eigen::MatrixXd factor);

  const Variant &variant() const { return value_; }
  bool is_dense() const { return std::holds_alternative<Dense>(value_); }
  bool is_block_diagonal() const {
    return std::holds_alternative<BlockDiagonal>(value_);
  }

  Eigen::Index dim() const;
  Eigen::Index num_blocks() const;
  const Eigen::MatrixXd &block(Eigen::Index b) const;
  Eigen::MatrixXd densify() const;

private:
  explicit StructuredPSD(Variant v) : value_(std::move(v)) {}
  Variant value_;
};

// Relative jitter applied on the first Cholesky retry when the caller asked
// for none. Overridden by the IVGP_JITTER environment variable.
double default_jitter();

inline constexpr int kCholeskyRetries = 5;

// L with L L^T = A + jitter * mean(diag(A)) * I. On failure the jitter is
// multiplied by ten (starting from default_jitter() when zero) for up to
// kCholeskyRetries attempts.
LowerTriangular cholesky(const Eigen::Ref<const Eigen::MatrixXd> &A,
                         double jitter = 0.0);

// Solves L X = B, or L^T X = B when `transpose` is set.
Eigen::MatrixXd tri_solve(const LowerTriangular &L,
                          const Eigen::Ref<const Eigen::MatrixXd> &B,
                          bool transpose = false);

Eigen::MatrixXd structured_solve(const StructuredPSD &K,
                                 const Eigen::Ref<const Eigen::MatrixXd> &B);
double structured_logdet(const StructuredPSD &K);

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

// Probabilists' Gauss-Hermite rule: sum_i w_i g(x_i) ~= E[g(x)], x ~ N(0, 1).
// Weights sum to one. Requires 1 <= n <= 200.
QuadratureRule gauss_hermite_nodes(int n);

// Counter-based generator: draw k of a stream is a pure function of
// (seed, k), so streams are reproducible and can be split without shared
// state.
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  explicit RngState(std::uint64_t s = 0) : seed(s) {}

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double next_uniform();
  // Independent child stream.
  RngState split(std::uint64_t stream) const;
};

// Box-Muller normals filled in column-major order.
Eigen::MatrixXd standard_normal(RngState &rng, Eigen::Index rows,
                                Eigen::Index cols);

} // namespace ivgp

#endif // IVGP_NUMERICS_HPP_
