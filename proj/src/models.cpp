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

#include "ivgp/models.hpp"

#include <cmath>
#include <map>
#include <string>

#include "ivgp/covariances.hpp"
#include "ivgp/divergences.hpp"
#include "ivgp/errors.hpp"

namespace ivgp {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void add_mean(PosteriorMoments &pm, const MeanFunction &mean,
              const Eigen::Ref<const Eigen::MatrixXd> &X) {
  if (mean.kind != MeanFunction::Kind::Zero) pm.mean += mean.evaluate(X, pm.num_outputs());
}

} // namespace

Eigen::MatrixXd MeanFunction::evaluate(const Eigen::Ref<const Eigen::MatrixXd> &X,
                                       Eigen::Index P) const {
  switch (kind) {
  case Kind::Zero:
    return Eigen::MatrixXd::Zero(X.rows(), P);
  case Kind::Constant: {
    if (values.size() != 1 && values.size() != P)
      throw Error(ErrorCode::ShapeMismatch, "constant mean needs 1 or P values");
    Eigen::MatrixXd out(X.rows(), P);
    for (Eigen::Index p = 0; p < P; ++p) out.col(p).setConstant(values(values.size() == 1 ? 0 : p));
    return out;
  }
  case Kind::Identity:
    if (X.cols() != P)
      throw Error(ErrorCode::ShapeMismatch, "identity mean needs as many outputs as inputs");
    return X;
  }
  return {};
}

void MeanFunction::visit_params(ParamVisitor &visitor, const std::string &name) {
  if (kind == Kind::Constant) visitor.visit(name, as_span(values), Transform::Identity);
}

void GPRModel::visit_params(ParamVisitor &visitor) {
  kernel->visit_params(visitor, "kernel.");
  visitor.visit("likelihood.variance", as_span(noise_variance), Transform::Positive);
}

namespace {

LowerTriangular gpr_factor(const GPRModel &model) {
  if (model.Y.cols() != 1 || model.Y.rows() != model.X.rows())
    throw Error(ErrorCode::ShapeMismatch, "GPR needs an N x 1 target");
  Eigen::MatrixXd K = as_single_output(*model.kernel).k_full(model.X);
  K.diagonal().array() += model.noise_variance;
  return cholesky(K);
}

} // namespace

double gpr_log_marginal(const GPRModel &model) {
  const LowerTriangular L = gpr_factor(model);
  const double N = static_cast<double>(model.X.rows());
  const Eigen::MatrixXd alpha = tri_solve(L, model.Y);
  return -0.5 * alpha.squaredNorm() - L.diagonal().array().log().sum() - 0.5 * N * kLog2Pi;
}

PosteriorMoments gpr_predict(const GPRModel &model, const Eigen::Ref<const Eigen::MatrixXd> &Xnew,
                             bool full_cov) {
  const SingleOutputKernel &k = as_single_output(*model.kernel);
  const LowerTriangular L = gpr_factor(model);
  const Eigen::MatrixXd A = tri_solve(L, k.k_full(model.X, Xnew));
  const Eigen::MatrixXd alpha = tri_solve(L, model.Y);
  PosteriorMoments pm;
  pm.mean = A.transpose() * alpha;
  pm.full_cov = full_cov;
  const Eigen::Index N = Xnew.rows();
  if (full_cov) {
    Eigen::MatrixXd cov = k.k_full(Xnew) - A.transpose() * A;
    cov = 0.5 * (cov + cov.transpose()).eval();
    pm.cov = Tensor::from_matrix(cov, {1, N, N});
  } else {
    const Eigen::VectorXd var = k.k_diag(Xnew) - A.colwise().squaredNorm().transpose();
    pm.cov = Tensor::from_matrix(var, {N, 1});
  }
  return pm;
}

SVGPModel SVGPModel::make(Cloned<Kernel> kernel, Likelihood likelihood,
                          Cloned<InducingVariable> inducing, bool whiten) {
  SVGPModel m;
  const Eigen::Index Mt = num_inducing(*inducing, *kernel);
  Eigen::Index blocks = 0;
  if (is_latent_inducing(*inducing)) {
    const auto *mo = dynamic_cast<const MultioutputKernel *>(kernel.get());
    if (!mo) throw Error(ErrorCode::UnsupportedCombination, "latent inducing variables need a multioutput kernel");
    blocks = mo->num_latent();
  }
  if (blocks > 0) {
    std::vector<LowerTriangular> qs;
    for (Eigen::Index l = 0; l < blocks; ++l)
      qs.push_back(LowerTriangular::identity(latent_part(*inducing, l).size()));
    m.q.q_mu = Eigen::VectorXd::Zero(Mt);
    m.q.whiten = whiten;
    m.q.q_sqrt = std::move(qs);
  } else {
    m.q = VariationalGaussian::standard(Mt, whiten);
  }
  m.kernel = std::move(kernel);
  m.likelihood = std::move(likelihood);
  m.inducing = std::move(inducing);
  return m;
}

void visit_variational(VariationalGaussian &q, ParamVisitor &visitor, const std::string &prefix) {
  visitor.visit(prefix + "q_mu", as_span(q.q_mu), Transform::Identity);
  if (auto *L = std::get_if<LowerTriangular>(&q.q_sqrt)) {
    visitor.visit(prefix + "q_sqrt", L->packed(), Transform::LowerTriangularPositiveDiag, L->dim());
    return;
  }
  auto &blocks = std::get<std::vector<LowerTriangular>>(q.q_sqrt);
  for (std::size_t l = 0; l < blocks.size(); ++l)
    visitor.visit(prefix + "q_sqrt." + std::to_string(l), blocks[l].packed(),
                  Transform::LowerTriangularPositiveDiag, blocks[l].dim());
}

void SVGPModel::visit_params(ParamVisitor &visitor) {
  kernel->visit_params(visitor, "kernel.");
  likelihood.visit_params(visitor, "likelihood.");
  inducing->visit_params(visitor, "inducing.");
  visit_variational(q, visitor, "");
  mean.visit_params(visitor, "mean");
}

Eigen::VectorXd svgp_expectations(const SVGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                                  const Eigen::Ref<const Eigen::MatrixXd> &Y) {
  PosteriorMoments pm = conditional(X, *model.inducing, *model.kernel, model.q, false,
                                    model.likelihood.output_correlated(), model.jitter);
  add_mean(pm, model.mean, X);
  return model.likelihood.variational_expectations(pm.mean, pm.cov, Y);
}

double svgp_elbo(const SVGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                 const Eigen::Ref<const Eigen::MatrixXd> &Y, double scale) {
  const double data = svgp_expectations(model, X, Y).sum();
  const double kl = prior_kl(*model.inducing, *model.kernel, model.q, model.jitter);
  return scale * data - kl;
}

double svgp_elbo_heterotopic(const SVGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                             const std::vector<Eigen::Index> &output_index,
                             const Eigen::Ref<const Eigen::VectorXd> &y, double scale) {
  const Eigen::Index N = X.rows();
  if (static_cast<Eigen::Index>(output_index.size()) != N || y.size() != N)
    throw Error(ErrorCode::ShapeMismatch, "heterotopic rows, indices and targets differ in length");
  const Eigen::Index P = model.num_outputs();
  for (auto p : output_index)
    if (p < 0 || p >= P)
      throw Error(ErrorCode::DataError, "output index " + std::to_string(p) + " out of range");

  // Group rows by identical input.
  std::map<std::vector<double>, Eigen::Index> slot;
  std::vector<std::vector<Eigen::Index>> groups;
  for (Eigen::Index n = 0; n < N; ++n) {
    std::vector<double> key(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index d = 0; d < X.cols(); ++d) key[static_cast<std::size_t>(d)] = X(n, d);
    auto [it, inserted] = slot.emplace(key, static_cast<Eigen::Index>(groups.size()));
    if (inserted) groups.emplace_back();
    groups[static_cast<std::size_t>(it->second)].push_back(n);
  }
  Eigen::MatrixXd U(static_cast<Eigen::Index>(groups.size()), X.cols());
  for (std::size_t g = 0; g < groups.size(); ++g) U.row(static_cast<Eigen::Index>(g)) = X.row(groups[g][0]);

  const bool correlated = model.likelihood.output_correlated();
  PosteriorMoments pm =
      conditional(U, *model.inducing, *model.kernel, model.q, false, correlated, model.jitter);
  add_mean(pm, model.mean, U);

  double data = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const Eigen::Index u = static_cast<Eigen::Index>(g);
    const auto &rows = groups[g];
    if (!correlated) {
      for (auto n : rows) {
        const Eigen::Index p = output_index[static_cast<std::size_t>(n)];
        Tensor var({1, 1});
        var(0, 0) = pm.cov(u, p);
        data += model.likelihood
                    .variational_expectations(Eigen::MatrixXd::Constant(1, 1, pm.mean(u, p)), var,
                                              Eigen::MatrixXd::Constant(1, 1, y(n)))
                    .sum();
      }
      continue;
    }
    std::vector<Eigen::Index> subset;
    for (auto n : rows) subset.push_back(output_index[static_cast<std::size_t>(n)]);
    const Eigen::Index S = static_cast<Eigen::Index>(subset.size());
    const Likelihood lik = model.likelihood.marginalize_outputs(subset);
    Eigen::MatrixXd mu(1, S), obs(1, S);
    for (Eigen::Index a = 0; a < S; ++a) {
      mu(0, a) = pm.mean(u, subset[static_cast<std::size_t>(a)]);
      obs(0, a) = y(rows[static_cast<std::size_t>(a)]);
    }
    Tensor var;
    if (lik.output_correlated()) {
      var = Tensor({1, S, S});
      for (Eigen::Index a = 0; a < S; ++a)
        for (Eigen::Index b = 0; b < S; ++b)
          var(0, a, b) = pm.cov(u, subset[static_cast<std::size_t>(a)], subset[static_cast<std::size_t>(b)]);
    } else {
      var = Tensor({1, S});
      for (Eigen::Index a = 0; a < S; ++a)
        var(0, a) = pm.cov(u, subset[static_cast<std::size_t>(a)], subset[static_cast<std::size_t>(a)]);
    }
    data += lik.variational_expectations(mu, var, obs).sum();
  }
  const double kl = prior_kl(*model.inducing, *model.kernel, model.q, model.jitter);
  return scale * data - kl;
}

VariationalGaussian optimal_q(const SVGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                              const Eigen::Ref<const Eigen::MatrixXd> &Y) {
  if (model.likelihood.kind() != Likelihood::Kind::Gaussian)
    throw Error(ErrorCode::UnsupportedCombination, "optimal q needs a Gaussian likelihood");
  if (output_count(*model.kernel) != 1 || Y.cols() != 1)
    throw Error(ErrorCode::UnsupportedCombination, "optimal q is implemented for one output");
  const StructuredPSD Kuu = kuu(*model.inducing, *model.kernel, model.jitter);
  KufResult kr = kuf(*model.inducing, *model.kernel, X);
  const auto *Kuf = std::get_if<Eigen::MatrixXd>(&kr);
  if (!Kuf) throw Error(ErrorCode::UnsupportedCombination, "optimal q needs an M x N Kuf");
  const LowerTriangular L = cholesky(Kuu.densify());
  const Eigen::MatrixXd A = tri_solve(L, *Kuf);
  const double inv_noise = 1.0 / model.likelihood.variance();
  const Eigen::Index M = A.rows();

  Eigen::MatrixXd Lambda = inv_noise * A * A.transpose();
  Lambda.diagonal().array() += 1.0;
  const LowerTriangular R = cholesky(Lambda);
  const Eigen::MatrixXd Rinv = tri_solve(R, Eigen::MatrixXd::Identity(M, M));
  const Eigen::MatrixXd Sv = Rinv.transpose() * Rinv;
  Eigen::VectorXd residual = Y.col(0);
  if (model.mean.kind != MeanFunction::Kind::Zero) residual -= model.mean.evaluate(X, 1).col(0);
  const Eigen::VectorXd mv = inv_noise * Sv * (A * residual);

  VariationalGaussian q;
  q.whiten = model.q.whiten;
  const LowerTriangular Lv = cholesky(0.5 * (Sv + Sv.transpose()));
  if (q.whiten) {
    q.q_mu = mv;
    q.q_sqrt = Lv;
    return q;
  }
  const Eigen::MatrixXd Ld = L.dense();
  q.q_mu = Ld * mv;
  q.q_sqrt = LowerTriangular::from_dense(Ld * Lv.dense());
  return q;
}

PosteriorMoments svgp_predict_f(const SVGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                                bool full_cov, bool full_output_cov) {
  PosteriorMoments pm =
      conditional(X, *model.inducing, *model.kernel, model.q, full_cov, full_output_cov, model.jitter);
  add_mean(pm, model.mean, X);
  return pm;
}

void DGPModel::validate(Eigen::Index input_dim) const {
  if (layers.empty()) throw Error(ErrorCode::InvalidParameter, "a deep GP needs at least one layer");
  Eigen::Index width = input_dim;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto &layer = layers[l];
    if (output_count(*layer.kernel) != layer.output_dim)
      throw Error(ErrorCode::ShapeMismatch,
                  "layer " + std::to_string(l) + " kernel has " +
                      std::to_string(output_count(*layer.kernel)) + " outputs, declared " +
                      std::to_string(layer.output_dim));
    if (const auto *ip = dynamic_cast<const InducingPoints *>(&latent_part(*layer.inducing, 0)))
      if (ip->Z().cols() != width && layer.inducing->type_tag() != "InducingPatches")
        throw Error(ErrorCode::ShapeMismatch,
                    "layer " + std::to_string(l) + " expects input width " +
                        std::to_string(ip->Z().cols()) + ", previous width is " +
                        std::to_string(width));
    width = layer.output_dim;
  }
}

void DGPModel::visit_params(ParamVisitor &visitor) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    layers[l].kernel->visit_params(visitor, prefix + "kernel.");
    layers[l].inducing->visit_params(visitor, prefix + "inducing.");
    visit_variational(layers[l].q, visitor, prefix);
    layers[l].mean.visit_params(visitor, prefix + "mean");
  }
  likelihood.visit_params(visitor, "likelihood.");
}

namespace {

// Draws one sample of the input to the last layer.
Eigen::MatrixXd propagate(const DGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                          RngState &rng) {
  Eigen::MatrixXd H = X;
  for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) {
    const DGPLayer &layer = model.layers[l];
    const Tensor s = sample_conditional(H, *layer.inducing, *layer.kernel, layer.q, rng, 1, model.jitter);
    Eigen::MatrixXd next = s.as_matrix(H.rows(), layer.output_dim);
    if (layer.mean.kind != MeanFunction::Kind::Zero) next += layer.mean.evaluate(H, layer.output_dim);
    H = std::move(next);
  }
  return H;
}

PosteriorMoments last_layer(const DGPModel &model, const Eigen::MatrixXd &H, bool full_output_cov) {
  const DGPLayer &layer = model.layers.back();
  PosteriorMoments pm =
      conditional(H, *layer.inducing, *layer.kernel, layer.q, false, full_output_cov, model.jitter);
  add_mean(pm, layer.mean, H);
  return pm;
}

} // namespace

double dgp_kl(const DGPModel &model) {
  double kl = 0.0;
  for (const auto &layer : model.layers)
    kl += prior_kl(*layer.inducing, *layer.kernel, layer.q, model.jitter);
  return kl;
}

double dgp_elbo(const DGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &X,
                const Eigen::Ref<const Eigen::MatrixXd> &Y, RngState &rng, double scale) {
  model.validate(X.cols());
  const Eigen::Index S = std::max<Eigen::Index>(model.num_samples, 1);
  const bool correlated = model.likelihood.output_correlated();
  double data = 0.0;
  for (Eigen::Index s = 0; s < S; ++s) {
    const Eigen::MatrixXd H = propagate(model, X, rng);
    const PosteriorMoments pm = last_layer(model, H, correlated);
    data += model.likelihood.variational_expectations(pm.mean, pm.cov, Y).sum();
  }
  return scale * data / static_cast<double>(S) - dgp_kl(model);
}

std::vector<PosteriorMoments> dgp_predict_f(const DGPModel &model,
                                            const Eigen::Ref<const Eigen::MatrixXd> &X,
                                            RngState &rng, Eigen::Index num_samples) {
  model.validate(X.cols());
  std::vector<PosteriorMoments> out;
  for (Eigen::Index s = 0; s < num_samples; ++s)
    out.push_back(last_layer(model, propagate(model, X, rng), false));
  return out;
}

void UncertainSVGPModel::visit_params(ParamVisitor &visitor) {
  svgp.visit_params(visitor);
  visitor.visit("inputs.mean", as_span(input_mean), Transform::Identity);
  visitor.visit("inputs.var", as_span(input_var), Transform::Positive);
}

namespace {

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

} // namespace

double input_kl(const UncertainSVGPModel &model, const std::vector<Eigen::Index> &rows) {
  const auto idx = rows.empty() ? all_rows(model.input_mean.rows()) : rows;
  double kl = 0.0;
  for (auto n : idx) {
    const auto s = model.input_var.row(n).array();
    const auto mu = model.input_mean.row(n).array();
    kl += 0.5 * (s + mu.square() - 1.0 - s.log()).sum();
  }
  return kl;
}

double uncertain_elbo(const UncertainSVGPModel &model, const Eigen::Ref<const Eigen::MatrixXd> &Y,
                      RngState &rng, const std::vector<Eigen::Index> &rows, double scale) {
  if (model.input_mean.rows() != model.input_var.rows() ||
      model.input_mean.cols() != model.input_var.cols())
    throw Error(ErrorCode::ShapeMismatch, "input means and variances differ in shape");
  if ((model.input_var.array() <= 0.0).any())
    throw Error(ErrorCode::InvalidParameter, "input variances must be positive");
  const auto idx = rows.empty() ? all_rows(model.input_mean.rows()) : rows;
  const Eigen::Index B = static_cast<Eigen::Index>(idx.size());
  if (Y.rows() != B) throw Error(ErrorCode::ShapeMismatch, "targets do not match the batch");
  const Eigen::MatrixXd mu = model.input_mean(idx, Eigen::all);
  const Eigen::MatrixXd sd = model.input_var(idx, Eigen::all).cwiseSqrt();
  const Eigen::Index S = std::max<Eigen::Index>(model.num_samples, 1);
  double data = 0.0;
  for (Eigen::Index s = 0; s < S; ++s) {
    const Eigen::MatrixXd eps = standard_normal(rng, B, mu.cols());
    const Eigen::MatrixXd Xs = mu + sd.cwiseProduct(eps);
    data += svgp_expectations(model.svgp, Xs, Y).sum();
  }
  data /= static_cast<double>(S);
  const double kl = prior_kl(*model.svgp.inducing, *model.svgp.kernel, model.svgp.q, model.svgp.jitter);
  return scale * (data - input_kl(model, idx)) - kl;
}

} // namespace ivgp
