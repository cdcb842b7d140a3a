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

#include "ivgp/divergences.hpp"

#include <cmath>
#include <string>

#include "ivgp/errors.hpp"

namespace ivgp {
namespace {

double log_det_sqrt(const Eigen::MatrixXd &Ls) {
  return 2.0 * Ls.diagonal().array().abs().log().sum();
}

double whitened_kl(const Eigen::Ref<const Eigen::VectorXd> &m, const Eigen::MatrixXd &Ls) {
  const double M = static_cast<double>(m.size());
  return 0.5 * (m.squaredNorm() + Ls.squaredNorm() - M - log_det_sqrt(Ls));
}

double dense_kl(const Eigen::Ref<const Eigen::VectorXd> &m, const Eigen::MatrixXd &Ls,
                const LowerTriangular &L) {
  const double M = static_cast<double>(m.size());
  const double trace = tri_solve(L, Ls).squaredNorm();
  const double mahalanobis = tri_solve(L, m).squaredNorm();
  const double logdet_k = 2.0 * L.diagonal().array().log().sum();
  return 0.5 * (trace + mahalanobis - M + logdet_k - log_det_sqrt(Ls));
}

double structured_kl(const Eigen::Ref<const Eigen::VectorXd> &m, const Eigen::MatrixXd &Ls,
                     const StructuredPSD &K) {
  if (K.is_dense()) return dense_kl(m, Ls, cholesky(K.densify()));
  const double M = static_cast<double>(m.size());
  const double trace = Ls.cwiseProduct(structured_solve(K, Ls)).sum();
  const double mahalanobis = m.dot(structured_solve(K, m).col(0));
  return 0.5 * (trace + mahalanobis - M + structured_logdet(K) - log_det_sqrt(Ls));
}

} // namespace

double gauss_kl(const VariationalGaussian &q, const StructuredPSD *Kuu) {
  if (!Kuu) {
    double total = 0.0;
    Eigen::Index offset = 0;
    for (Eigen::Index b = 0; b < q.num_blocks(); ++b) {
      const Eigen::Index M = q.block(b).dim();
      total += whitened_kl(q.q_mu.segment(offset, M), q.block(b).dense());
      offset += M;
    }
    if (offset != q.size())
      throw Error(ErrorCode::ShapeMismatch, "q_sqrt blocks do not cover q_mu");
    return total;
  }
  if (Kuu->dim() != q.size())
    throw Error(ErrorCode::ShapeMismatch,
                "Kuu is " + std::to_string(Kuu->dim()) + " wide, q has " +
                    std::to_string(q.size()) + " entries");
  if (Kuu->is_block_diagonal() && q.is_block() && Kuu->num_blocks() == q.num_blocks()) {
    const bool shared =
        std::get<StructuredPSD::BlockDiagonal>(Kuu->variant()).blocks.size() == 1;
    LowerTriangular shared_factor;
    if (shared) shared_factor = cholesky(Kuu->block(0));
    double total = 0.0;
    Eigen::Index offset = 0;
    for (Eigen::Index b = 0; b < q.num_blocks(); ++b) {
      const Eigen::Index M = q.block(b).dim();
      if (Kuu->block(b).rows() != M)
        throw Error(ErrorCode::ShapeMismatch, "Kuu block does not match q_sqrt block");
      const auto m = q.q_mu.segment(offset, M);
      total += shared ? dense_kl(m, q.block(b).dense(), shared_factor)
                      : dense_kl(m, q.block(b).dense(), cholesky(Kuu->block(b)));
      offset += M;
    }
    return total;
  }
  if (Kuu->is_block_diagonal())
    return structured_kl(q.q_mu, q.dense_sqrt(), StructuredPSD::dense(Kuu->densify()));
  return structured_kl(q.q_mu, q.dense_sqrt(), *Kuu);
}

namespace {

double default_prior_kl(const InducingVariable &iv, const Kernel &kernel,
                        const VariationalGaussian &q, double jitter) {
  if (q.whiten) return gauss_kl(q, nullptr);
  const StructuredPSD K = kuu(iv, kernel, jitter);
  return gauss_kl(q, &K);
}

} // namespace

DispatchRegistry<PriorKlFn> &prior_kl_registry() {
  static DispatchRegistry<PriorKlFn> registry = [] {
    DispatchRegistry<PriorKlFn> r("prior_kl", inducing_types(), kernel_types());
    r.add("InducingVariable", "Kernel", default_prior_kl);
    return r;
  }();
  return registry;
}

double prior_kl(const InducingVariable &iv, const Kernel &kernel, const VariationalGaussian &q,
                double jitter) {
  if (q.size() != num_inducing(iv, kernel))
    throw Error(ErrorCode::ShapeMismatch, "q does not match the inducing variables");
  return prior_kl_registry().resolve(iv.type_tag(), kernel.type_tag())(iv, kernel, q, jitter);
}

} // namespace ivgp
