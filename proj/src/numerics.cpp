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

#include "ivgp/numerics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>

#include "ivgp/compute.hpp"

namespace ivgp {

LowerTriangular LowerTriangular::identity(Eigen::Index dim) {
  LowerTriangular L(dim);
  for (Eigen::Index j = 0; j < dim; ++j) L.at(j, j) = 1.0;
  return L;
}

LowerTriangular LowerTriangular::from_dense(const Eigen::Ref<const Eigen::MatrixXd> &m) {
  if (m.rows() != m.cols())
    throw Error(ErrorCode::NonSquare, "lower-triangular source must be square");
  LowerTriangular L(m.rows());
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = j; i < m.rows(); ++i) L.at(i, j) = m(i, j);
  return L;
}

LowerTriangular LowerTriangular::from_packed(Eigen::Index dim, std::vector<double> packed) {
  if (static_cast<Eigen::Index>(packed.size()) != packed_size(dim))
    throw Error(ErrorCode::ShapeMismatch,
                "packed length " + std::to_string(packed.size()) +
                    " does not match dim " + std::to_string(dim));
  LowerTriangular L;
  L.dim_ = dim;
  L.packed_ = std::move(packed);
  return L;
}

double &LowerTriangular::at(Eigen::Index i, Eigen::Index j) {
  if (i < j || i >= dim_ || j < 0)
    throw Error(ErrorCode::ShapeMismatch, "index outside the lower triangle");
  return packed_[index(i, j)];
}

Eigen::MatrixXd LowerTriangular::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
  for (Eigen::Index j = 0; j < dim_; ++j)
    for (Eigen::Index i = j; i < dim_; ++i) m(i, j) = packed_[index(i, j)];
  return m;
}

Eigen::VectorXd LowerTriangular::diagonal() const {
  Eigen::VectorXd d(dim_);
  for (Eigen::Index j = 0; j < dim_; ++j) d(j) = packed_[index(j, j)];
  return d;
}

StructuredPSD StructuredPSD::dense(Eigen::MatrixXd matrix) {
  if (matrix.rows() != matrix.cols())
    throw Error(ErrorCode::NonSquare, "covariance must be square");
  return StructuredPSD(Dense{std::move(matrix)});
}

StructuredPSD StructuredPSD::block_diagonal(std::vector<Eigen::MatrixXd> blocks) {
  for (const auto &b : blocks)
    if (b.rows() != b.cols())
      throw Error(ErrorCode::NonSquare, "diagonal blocks must be square");
  const auto count = static_cast<Eigen::Index>(blocks.size());
  return StructuredPSD(BlockDiagonal{std::move(blocks), count});
}

StructuredPSD StructuredPSD::shared_blocks(Eigen::MatrixXd block, Eigen::Index count) {
  if (block.rows() != block.cols())
    throw Error(ErrorCode::NonSquare, "diagonal blocks must be square");
  std::vector<Eigen::MatrixXd> blocks;
  blocks.push_back(std::move(block));
  return StructuredPSD(BlockDiagonal{std::move(blocks), count});
}

StructuredPSD StructuredPSD::diag_plus_low_rank(Eigen::VectorXd diag,
                                                Eigen::MatrixXd factor) {
  if (factor.rows() != diag.size())
    throw Error(ErrorCode::ShapeMismatch, "low-rank factor rows must equal diag length");
  if ((diag.array() <= 0.0).any())
    throw Error(ErrorCode::NotPositiveDefinite, "diagonal entries must be positive");
  return StructuredPSD(DiagPlusLowRank{std::move(diag), std::move(factor)});
}

Eigen::Index StructuredPSD::dim() const {
  struct {
    Eigen::Index operator()(const Dense &d) const { return d.matrix.rows(); }
    Eigen::Index operator()(const BlockDiagonal &b) const {
      if (b.blocks.size() == 1) return b.blocks[0].rows() * b.num_blocks;
      Eigen::Index n = 0;
      for (const auto &blk : b.blocks) n += blk.rows();
      return n;
    }
    Eigen::Index operator()(const DiagPlusLowRank &d) const { return d.diag.size(); }
  } visitor;
  return std::visit(visitor, value_);
}

Eigen::Index StructuredPSD::num_blocks() const {
  if (const auto *b = std::get_if<BlockDiagonal>(&value_)) return b->num_blocks;
  return 1;
}

const Eigen::MatrixXd &StructuredPSD::block(Eigen::Index b) const {
  if (const auto *bd = std::get_if<BlockDiagonal>(&value_)) {
    if (b < 0 || b >= bd->num_blocks)
      throw Error(ErrorCode::ShapeMismatch, "block index out of range");
    return bd->blocks.size() == 1 ? bd->blocks[0] : bd->blocks[static_cast<std::size_t>(b)];
  }
  if (const auto *d = std::get_if<Dense>(&value_)) return d->matrix;
  throw Error(ErrorCode::UnsupportedMode, "diag-plus-low-rank matrices have no blocks");
}

Eigen::MatrixXd StructuredPSD::densify() const {
  if (const auto *d = std::get_if<Dense>(&value_)) return d->matrix;
  if (const auto *r = std::get_if<DiagPlusLowRank>(&value_)) {
    Eigen::MatrixXd m = r->factor * r->factor.transpose();
    m.diagonal() += r->diag;
    return m;
  }
  const Eigen::Index n = dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  Eigen::Index offset = 0;
  for (Eigen::Index b = 0; b < num_blocks(); ++b) {
    const auto &blk = block(b);
    m.block(offset, offset, blk.rows(), blk.cols()) = blk;
    offset += blk.rows();
  }
  return m;
}

double default_jitter() {
  static const double value = [] {
    if (const char *env = std::getenv("IVGP_JITTER")) {
      char *end = nullptr;
      const double v = std::strtod(env, &end);
      if (end != env && v >= 0.0 && std::isfinite(v)) return v;
    }
    return 1e-6;
  }();
  return value;
}

LowerTriangular cholesky(const Eigen::Ref<const Eigen::MatrixXd> &A, double jitter) {
  if (A.rows() != A.cols())
    throw Error(ErrorCode::NonSquare, "cholesky of a " + std::to_string(A.rows()) +
                                          "x" + std::to_string(A.cols()) + " matrix");
  if (!(jitter >= 0.0))
    throw Error(ErrorCode::InvalidParameter, "jitter must be non-negative");
  const Eigen::Index n = A.rows();
  if (n == 0) return LowerTriangular(0);
  const double scale = A.cwiseAbs().maxCoeff();
  const double asym = (A - A.transpose()).cwiseAbs().maxCoeff();
  if (!std::isfinite(scale))
    throw Error(ErrorCode::NotPositiveDefinite, "matrix has non-finite entries");
  if (asym > 1e-10 * std::max(scale, 1e-300))
    throw Error(ErrorCode::AsymmetricInput,
                "matrix is not symmetric (max deviation " + std::to_string(asym) + ")");
  const double mean_diag = A.diagonal().mean();
  const double unit = mean_diag > 0.0 ? mean_diag : 1.0;

  double j = jitter;
  for (int attempt = 0; attempt <= kCholeskyRetries; ++attempt) {
    Eigen::MatrixXd work = A;
    if (j > 0.0) work.diagonal().array() += j * unit;
    if (compute::cholesky_lower(work)) return LowerTriangular::from_dense(work);
    j = j > 0.0 ? j * 10.0 : default_jitter();
    if (j == 0.0) break;
  }
  throw Error(ErrorCode::NotPositiveDefinite,
              std::to_string(n) + "x" + std::to_string(n) +
                  " matrix is not positive definite after jitter retries");
}

Eigen::MatrixXd tri_solve(const LowerTriangular &L,
                          const Eigen::Ref<const Eigen::MatrixXd> &B, bool transpose) {
  if (L.dim() != B.rows())
    throw Error(ErrorCode::DimensionMismatch,
                "triangular solve with dim " + std::to_string(L.dim()) + " and " +
                    std::to_string(B.rows()) + " rows");
  for (Eigen::Index j = 0; j < L.dim(); ++j)
    if (L(j, j) == 0.0)
      throw Error(ErrorCode::ZeroDiagonal, "zero on diagonal at " + std::to_string(j));
  return compute::lower_solve(L.dense(), B, transpose);
}

namespace {

Eigen::MatrixXd dense_solve(const Eigen::MatrixXd &K,
                            const Eigen::Ref<const Eigen::MatrixXd> &B) {
  const LowerTriangular L = cholesky(K);
  return tri_solve(L, tri_solve(L, B), true);
}

double dense_logdet(const Eigen::MatrixXd &K) {
  return 2.0 * cholesky(K).diagonal().array().log().sum();
}

} // namespace

Eigen::MatrixXd structured_solve(const StructuredPSD &K,
                                 const Eigen::Ref<const Eigen::MatrixXd> &B) {
  if (K.dim() != B.rows())
    throw Error(ErrorCode::DimensionMismatch, "structured solve shape mismatch");
  const auto &v = K.variant();
  if (const auto *d = std::get_if<StructuredPSD::Dense>(&v)) return dense_solve(d->matrix, B);
  if (const auto *r = std::get_if<StructuredPSD::DiagPlusLowRank>(&v)) {
    const Eigen::VectorXd inv = r->diag.cwiseInverse();
    const Eigen::MatrixXd aB = inv.asDiagonal() * B;
    const Eigen::MatrixXd aF = inv.asDiagonal() * r->factor;
    Eigen::MatrixXd core = r->factor.transpose() * aF;
    core.diagonal().array() += 1.0;
    return aB - aF * dense_solve(core, r->factor.transpose() * aB);
  }
  const auto &bd = std::get<StructuredPSD::BlockDiagonal>(v);
  Eigen::MatrixXd X(B.rows(), B.cols());
  if (bd.blocks.size() == 1) {
    const Eigen::Index m = bd.blocks[0].rows();
    const LowerTriangular L = cholesky(bd.blocks[0]);
    for (Eigen::Index b = 0; b < bd.num_blocks; ++b)
      X.middleRows(b * m, m) = tri_solve(L, tri_solve(L, B.middleRows(b * m, m)), true);
    return X;
  }
  Eigen::Index offset = 0;
  for (const auto &blk : bd.blocks) {
    X.middleRows(offset, blk.rows()) = dense_solve(blk, B.middleRows(offset, blk.rows()));
    offset += blk.rows();
  }
  return X;
}

double structured_logdet(const StructuredPSD &K) {
  const auto &v = K.variant();
  if (const auto *d = std::get_if<StructuredPSD::Dense>(&v)) return dense_logdet(d->matrix);
  if (const auto *r = std::get_if<StructuredPSD::DiagPlusLowRank>(&v)) {
    Eigen::MatrixXd core = r->factor.transpose() * r->diag.cwiseInverse().asDiagonal() * r->factor;
    core.diagonal().array() += 1.0;
    return r->diag.array().log().sum() + (core.size() ? dense_logdet(core) : 0.0);
  }
  const auto &bd = std::get<StructuredPSD::BlockDiagonal>(v);
  if (bd.blocks.size() == 1)
    return static_cast<double>(bd.num_blocks) * dense_logdet(bd.blocks[0]);
  double total = 0.0;
  for (const auto &blk : bd.blocks) total += dense_logdet(blk);
  return total;
}

QuadratureRule gauss_hermite_nodes(int n) {
  if (n < 1 || n > 200)
    throw Error(ErrorCode::InvalidParameter,
                "quadrature order must be in [1, 200], got " + std::to_string(n));
  // Golub-Welsch start: eigenvalues of the Jacobi matrix of the probabilists'
  // Hermite recurrence, then Newton on the orthonormal polynomial.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J, Eigen::EigenvaluesOnly);
  Eigen::VectorXd x = eig.eigenvalues();

  // Orthonormal values p_0..p_n at t; returns (p_n, p_{n-1}, sum_{k<n} p_k^2).
  auto evaluate = [n](double t, double &pn, double &pn1, double &sumsq) {
    double prev = 0.0;
    double cur = 1.0;
    sumsq = 0.0;
    for (int k = 0; k < n; ++k) {
      sumsq += cur * cur;
      const double next =
          (t * cur - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(k + 1.0);
      prev = cur;
      cur = next;
    }
    pn = cur;
    pn1 = prev;
  };

  QuadratureRule rule{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    double t = x(i);
    double pn = 0, pn1 = 0, s = 0;
    for (int it = 0; it < 8; ++it) {
      evaluate(t, pn, pn1, s);
      const double deriv = std::sqrt(static_cast<double>(n)) * pn1;
      if (deriv == 0.0) break;
      const double step = pn / deriv;
      t -= step;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(t))) break;
    }
    evaluate(t, pn, pn1, s);
    rule.nodes(i) = t;
    rule.weights(i) = 1.0 / s;
  }
  for (int i = 0; i < n / 2; ++i) {
    const double a = 0.5 * (rule.nodes(n - 1 - i) - rule.nodes(i));
    const double w = 0.5 * (rule.weights(i) + rule.weights(n - 1 - i));
    rule.nodes(i) = -a;
    rule.nodes(n - 1 - i) = a;
    rule.weights(i) = rule.weights(n - 1 - i) = w;
  }
  if (n % 2 == 1) rule.nodes(n / 2) = 0.0;
  rule.weights /= rule.weights.sum();
  return rule;
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

} // namespace

std::uint64_t RngState::next_u64() {
  const std::uint64_t key = mix64(seed ^ 0x6A09E667F3BCC909ULL);
  return mix64(key + kGolden * (++counter));
}

double RngState::next_uniform() {
  // 53 random bits mapped to the midpoints of a 2^-53 grid, never 0 or 1.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

RngState RngState::split(std::uint64_t stream) const {
  RngState child(mix64(mix64(seed) ^ mix64(stream + kGolden)) ^ counter);
  return child;
}

Eigen::MatrixXd standard_normal(RngState &rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd out(rows, cols);
  double *data = out.data();
  const Eigen::Index total = rows * cols;
  for (Eigen::Index i = 0; i < total; i += 2) {
    const double u1 = rng.next_uniform();
    const double u2 = rng.next_uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    data[i] = radius * std::cos(angle);
    if (i + 1 < total) data[i + 1] = radius * std::sin(angle);
  }
  return out;
}

} // namespace ivgp
