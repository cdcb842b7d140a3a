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

#ifndef IVGP_MODELS_HPP_
#define IVGP_MODELS_HPP_

#include <Eigen/Core>

#include <vector>

#include "ivgp/conditionals.hpp"
#include "ivgp/inducing.hpp"
#include "ivgp/kernels.hpp"
#include "ivgp/likelihoods.hpp"
#include "ivgp/numerics.hpp"
#include "ivgp/params.hpp"

namespace ivgp {

struct MeanFunction {
  enum class Kind { Zero, Constant, Identity };
  Kind kind = Kind::Zero;
  // Constant: one value per output, or a single value for all outputs.
  Eigen::VectorXd values;

  static MeanFunction zero() { return {}; }
  static MeanFunction constant(Eigen::VectorXd c) { return {Kind::Constant, std::move(c)}; }
  // Passes inputs through; needs as many outputs as input columns.
  static MeanFunction identity() { return {Kind::Identity, {}}; }

  Eigen::MatrixXd evaluate(const Eigen::Ref<const Eigen::MatrixXd> &X, Eigen::Index P) const;
  void visit_params(ParamVisitor &visitor, const std::string &name);
};

struct GPRModel {
  Cloned<Kernel> kernel;
  double noise_variance = 1.0;
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y; // N x 1

  void visit_params(ParamVisitor &visitor);
};

double gpr_log_marginal(const GPRModel &model);
PosteriorMoments gpr_predict(const GPRModel &model, const Eigen::Ref<const Eigen::MatrixXd> &Xnew,
                             bool full_cov = false);

struct SVGPModel {
  Cloned<Kernel> kernel;
  Likelihood likelihood = Likelihood::gaussian(1.0);
  Cloned<InducingVariable> inducing;
  VariationalGaussian q;
  MeanFunction mean;
  // Training-set size used to scale minibatch estimates; 0 means "use the
  // batch as the full data set".
  Eigen::Index num_data = 0;
  double jitter = kDefaultKuuJitter;

  // Builds q = N(0, I) sized for (inducing, kernel), in block form for
  // latent inducing variables.
  static SVGPModel make(Cloned<Kernel> kernel, Likelihood likelihood,
                        Cloned<InducingVariable> inducing, bool whiten = true);

  Eigen::Index num_outputs() const { return output_count(*kernel); }
  void visit_params(ParamVisitor &visitor);
};

void visit_variational(VariationalGaussian &q, ParamVisitor &visitor, const std::string &prefix);

// scale * sum_n E_q[log p(y_n | f_n)] - KL(q(u) || p(u)).
double svgp_elbo(const SVGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                 const Eigen::Ref<const Eigen::MatrixXd> &Y, double scale = 1.0);
// Per-row expected log-likelihoods, the data part of the bound.
Eigen::VectorXd svgp_expectations(const SVGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                                  const Eigen::Ref<const Eigen::MatrixXd> &Y);

// Heterotopic data: row n observes output output_index[n] at X.row(n).
// Rows sharing an input are grouped so correlated likelihoods see their
// joint observation.
double svgp_elbo_heterotopic(const SVGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                             const std::vector<Eigen::Index> &output_index,
                             const Eigen::Ref<const Eigen::VectorXd> &y, double scale = 1.0);

// Closed-form optimal q(u) for a Gaussian likelihood and a single-output
// kernel, in the model's whitening convention.
VariationalGaussian optimal_q(const SVGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                              const Eigen::Ref<const Eigen::MatrixXd> &Y);

PosteriorMoments svgp_predict_f(const SVGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                                bool full_cov = false, bool full_output_cov = false);

struct DGPLayer {
  Cloned<Kernel> kernel;
  Cloned<InducingVariable> inducing;
  VariationalGaussian q;
  MeanFunction mean;
  Eigen::Index output_dim = 1;
};

struct DGPModel {
  std::vector<DGPLayer> layers;
  Likelihood likelihood = Likelihood::gaussian(1.0);
  Eigen::Index num_samples = 1;
  Eigen::Index num_data = 0;
  double jitter = kDefaultKuuJitter;

  void validate(Eigen::Index input_dim) const;
  void visit_params(ParamVisitor &visitor);
};

// Propagates num_samples reparameterized samples through all but the last
// layer, then takes the expected log-likelihood of the last layer's
// conditional analytically. The layers have no transition noise.
double dgp_elbo(const DGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                const Eigen::Ref<const Eigen::MatrixXd> &Y, RngState &rng, double scale = 1.0);
double dgp_kl(const DGPModel &model);
// Moments of the last layer for each of `num_samples` propagated samples.
std::vector<PosteriorMoments> dgp_predict_f(const DGPModel &model,
                                            const Eigen::Ref<const Eigen::MatrixXd> &X,
                                            RngState &rng, Eigen::Index num_samples);

// SVGP whose training inputs are latent: q(x_n) = N(input_mean_n,
// diag(input_var_n)) with prior N(0, I).
struct UncertainSVGPModel {
  SVGPModel svgp;
  Eigen::MatrixXd input_mean;
  Eigen::MatrixXd input_var;
  Eigen::Index num_samples = 1;

  void visit_params(ParamVisitor &visitor);
};

// sum_n KL(q(x_n) || N(0, I)) over the given rows (all rows when empty).
double input_kl(const UncertainSVGPModel &model, const std::vector<Eigen::Index> &rows = {});

double uncertain_elbo(const UncertainSVGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &Y,
                      RngState &rng, const std::vector<Eigen::Index> &rows = {},
                      double scale = 1.0);

} // namespace ivgp

#endif // IVGP_MODELS_HPP_
