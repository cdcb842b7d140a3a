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

#ifndef IVGP_LIKELIHOODS_HPP_
#define IVGP_LIKELIHOODS_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ivgp/numerics.hpp"
#include "ivgp/params.hpp"
#include "ivgp/tensor.hpp"

namespace ivgp {

struct ClosedForm {};
struct GaussHermite {
  int nodes = 20;
};
struct MonteCarlo {
  int samples = 1000;
  std::uint64_t seed = 0;
};
using Strategy = std::variant<ClosedForm, GaussHermite, MonteCarlo>;

struct Expectation {
  Eigen::VectorXd value;
  // Monte Carlo standard error per row; zero for deterministic strategies.
  Eigen::VectorXd std_error;
};

class Likelihood {
public:
  enum class Kind { Gaussian, CorrelatedGaussian, Bernoulli, Poisson };

  static Likelihood gaussian(double variance);
  // Sigma must be symmetric positive definite; it is stored as its Cholesky
  // factor.
  static Likelihood correlated_gaussian(const Eigen::MatrixXd &Sigma);
  static Likelihood bernoulli();
  static Likelihood poisson();

  Kind kind() const { return kind_; }
  const Strategy &strategy() const { return strategy_; }
  void set_strategy(Strategy s) { strategy_ = s; }
  // True when observations of different outputs at one input are correlated.
  bool output_correlated() const { return kind_ == Kind::CorrelatedGaussian; }

  double variance() const;
  Eigen::MatrixXd covariance() const;
  const LowerTriangular &covariance_sqrt() const { return sqrt_; }
  Eigen::Index num_outputs() const { return kind_ == Kind::CorrelatedGaussian ? sqrt_.dim() : 0; }

  void visit_params(ParamVisitor &visitor, const std::string &prefix);

  // log p(y_n | f_n) summed over outputs, one entry per row.
  Eigen::VectorXd log_density(const Eigen::Ref<const Eigen::MatrixXd> &F,
                              const Eigen::Ref<const Eigen::MatrixXd> &Y) const;

  // E_q[log p(y_n | f_n)] for q(f_n) with means Fmu (N x P) and covariance
  // Fvar given as N x P variances or N x P x P per-point covariances.
  Expectation expectations(const Eigen::Ref<const Eigen::MatrixXd> &Fmu, const Tensor &Fvar,
                           const Eigen::Ref<const Eigen::MatrixXd> &Y) const;
  Eigen::VectorXd variational_expectations(const Eigen::Ref<const Eigen::MatrixXd> &Fmu,
                                           const Tensor &Fvar,
                                           const Eigen::Ref<const Eigen::MatrixXd> &Y) const;

  // The likelihood of the observed outputs `subset` (zero-based).
  Likelihood marginalize_outputs(const std::vector<Eigen::Index> &subset) const;

  // Mean and variance of y under q(f). Fvar is N x P, or N x P x P for the
  // correlated Gaussian, and the returned variance has the same shape.
  std::pair<Eigen::MatrixXd, Tensor>
  predict_observation_moments(const Eigen::Ref<const Eigen::MatrixXd> &Fmu,
                              const Tensor &Fvar) const;

  // log of the predictive density of y, one entry per row.
  Eigen::VectorXd predict_log_density(const Eigen::Ref<const Eigen::MatrixXd> &Fmu,
                                      const Tensor &Fvar,
                                      const Eigen::Ref<const Eigen::MatrixXd> &Y) const;

private:
  Likelihood(Kind kind, Strategy strategy) : kind_(kind), strategy_(strategy) {}

  double point_log_density(double f, double y) const;
  void check_observations(const Eigen::Ref<const Eigen::MatrixXd> &Y) const;

  Kind kind_;
  Strategy strategy_;
  double variance_ = 1.0;
  LowerTriangular sqrt_;
};

const char *likelihood_name(Likelihood::Kind kind);

// Cached rule; see gauss_hermite_nodes.
const QuadratureRule &cached_gauss_hermite(int n);

// log of the standard normal CDF, accurate in the far left tail.
double log_normal_cdf(double x);
double normal_cdf(double x);

} // namespace ivgp

#endif // IVGP_LIKELIHOODS_HPP_
