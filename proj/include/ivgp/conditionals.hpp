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

#ifndef IVGP_CONDITIONALS_HPP_
#define IVGP_CONDITIONALS_HPP_

#include <Eigen/Core>

#include <functional>
#include <variant>
#include <vector>

#include "ivgp/covariances.hpp"
#include "ivgp/dispatch.hpp"
#include "ivgp/inducing.hpp"
#include "ivgp/kernels.hpp"
#include "ivgp/numerics.hpp"
#include "ivgp/tensor.hpp"

namespace ivgp {

// Jitter added to Kuu by the conditionals unless the caller overrides it.
inline constexpr double kDefaultKuuJitter = 1e-6;

// Above this N * P the mixed-flag fully correlated conditional works one
// output (or one input) at a time instead of building the full tensor.
inline constexpr Eigen::Index kDenseMixedCutoff = 512;

/*
 * q(u) = N(q_mu, S), S = q_sqrt q_sqrt^T. With whiten set, u = L v for
 * L L^T = Kuu and the parameters describe q(v) instead.
 *
 * q_mu is always stacked into one vector. The block form of q_sqrt holds one
 * factor per latent process and is only valid for shared or separate
 * independent inducing variables, where q_mu is ordered l * M + m.
 */
struct VariationalGaussian {
  Eigen::VectorXd q_mu;
  std::variant<LowerTriangular, std::vector<LowerTriangular>> q_sqrt;
  bool whiten = true;

  Eigen::Index size() const { return q_mu.size(); }
  bool is_block() const { return q_sqrt.index() == 1; }
  // Dense factor; the block form is expanded block-diagonally.
  Eigen::MatrixXd dense_sqrt() const;
  // Factor of block l (the whole factor for the dense form when l == 0).
  const LowerTriangular &block(Eigen::Index l) const;
  Eigen::Index num_blocks() const;

  // q_mu = 0 and q_sqrt = I, either dense or as `blocks` equal blocks.
  static VariationalGaussian standard(Eigen::Index size, bool whiten, Eigen::Index blocks = 0);
};

/*
 * Predictive moments of f at N inputs with P outputs. cov has the shape
 * selected by the flags:
 *   full_cov  full_output_cov  shape
 *   true      true             N x P x N x P
 *   true      false            P x N x N
 *   false     true             N x P x P
 *   false     false            N x P
 */
struct PosteriorMoments {
  Eigen::MatrixXd mean;
  Tensor cov;
  bool full_cov = false;
  bool full_output_cov = false;

  Eigen::Index num_points() const { return mean.rows(); }
  Eigen::Index num_outputs() const { return mean.cols(); }
  // N x P marginal variances, whatever the mode.
  Eigen::MatrixXd marginal_variance() const;
};

Tensor::Shape covariance_shape(Eigen::Index N, Eigen::Index P, bool full_cov,
                               bool full_output_cov);

struct ConditionalOptions {
  bool full_cov = false;
  bool full_output_cov = false;
  double jitter = kDefaultKuuJitter;
};

// Single-output conditional from precomputed covariances. Knn is N x N when
// full_cov, otherwise either N x N (diagonal used) or an N x 1 column of
// prior variances. q must use the dense factor form.
PosteriorMoments base_conditional(const Eigen::Ref<const Eigen::MatrixXd> &Kmn,
                                  const StructuredPSD &Kmm,
                                  const Eigen::Ref<const Eigen::MatrixXd> &Knn,
                                  const VariationalGaussian &q, bool full_cov);

// Conditional of inducing points under a P-output kernel when the two flags
// differ. Kmn is M~ x (N * P) with column n * P + p. Knn is P x N x N when
// full_cov, otherwise N x P x P.
PosteriorMoments fully_correlated_conditional(const Eigen::Ref<const Eigen::MatrixXd> &Kmn,
                                              Eigen::Index num_outputs,
                                              const StructuredPSD &Kmm, const Tensor &Knn,
                                              const VariationalGaussian &q, bool full_cov,
                                              bool full_output_cov);

using ConditionalFn = std::function<PosteriorMoments(
    const Eigen::Ref<const Eigen::MatrixXd> &X, const InducingVariable &, const Kernel &,
    const VariationalGaussian &, const ConditionalOptions &)>;

DispatchRegistry<ConditionalFn> &conditional_registry();

PosteriorMoments conditional(const Eigen::Ref<const Eigen::MatrixXd> &X,
                             const InducingVariable &iv, const Kernel &kernel,
                             const VariationalGaussian &q, const ConditionalOptions &options);

PosteriorMoments conditional(const Eigen::Ref<const Eigen::MatrixXd> &X,
                             const InducingVariable &iv, const Kernel &kernel,
                             const VariationalGaussian &q, bool full_cov = false,
                             bool full_output_cov = false, double jitter = kDefaultKuuJitter);

// num_samples x N x P draws of f(X), independent across inputs.
using SampleFn = std::function<Tensor(const Eigen::Ref<const Eigen::MatrixXd> &X,
                                      const InducingVariable &, const Kernel &,
                                      const VariationalGaussian &, RngState &,
                                      Eigen::Index num_samples, double jitter)>;

DispatchRegistry<SampleFn> &sample_conditional_registry();

Tensor sample_conditional(const Eigen::Ref<const Eigen::MatrixXd> &X,
                          const InducingVariable &iv, const Kernel &kernel,
                          const VariationalGaussian &q, RngState &rng,
                          Eigen::Index num_samples = 1, double jitter = kDefaultKuuJitter);

// True when the posterior at a single input can correlate outputs, so
// samples need the P x P marginal rather than per-output variances.
bool needs_output_covariance(const InducingVariable &iv, const Kernel &kernel);

} // namespace ivgp

#endif // IVGP_CONDITIONALS_HPP_
