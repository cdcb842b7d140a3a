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

#include "ivgp/likelihoods.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "ivgp/errors.hpp"

namespace ivgp {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

bool is_full(const Tensor &Fvar) { return Fvar.rank() == 3; }

void check_shapes(const Eigen::Ref<const Eigen::MatrixXd> &Fmu, const Tensor &Fvar,
                  const Eigen::Ref<const Eigen::MatrixXd> *Y) {
  const Eigen::Index N = Fmu.rows();
  const Eigen::Index P = Fmu.cols();
  const bool ok = (Fvar.rank() == 2 && Fvar.dim(0) == N && Fvar.dim(1) == P) ||
                  (Fvar.rank() == 3 && Fvar.dim(0) == N && Fvar.dim(1) == P && Fvar.dim(2) == P);
  if (!ok) throw Error(ErrorCode::ShapeMismatch, "Fvar must be N x P or N x P x P");
  if (Y && (Y->rows() != N || Y->cols() != P))
    throw Error(ErrorCode::ShapeMismatch,
                "Y is " + std::to_string(Y->rows()) + " x " + std::to_string(Y->cols()) +
                    ", Fmu is " + std::to_string(N) + " x " + std::to_string(P));
}

Eigen::MatrixXd point_cov(const Tensor &Fvar, Eigen::Index n) {
  const Eigen::Index P = Fvar.dim(1);
  Eigen::MatrixXd V(P, P);
  for (Eigen::Index a = 0; a < P; ++a)
    for (Eigen::Index b = 0; b < P; ++b) V(a, b) = Fvar(n, a, b);
  return V;
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd &V) {
  const Eigen::MatrixXd sym = 0.5 * (V + V.transpose());
  if (sym.diagonal().maxCoeff() <= 0.0) return Eigen::MatrixXd::Zero(V.rows(), V.cols());
  return cholesky(sym).dense();
}

double log_sum_exp(const Eigen::VectorXd &a) {
  const double m = a.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((a.array() - m).exp().sum());
}

} // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(normal_cdf(x));
  const double x2 = x * x;
  return -0.5 * x2 - 0.5 * kLog2Pi - std::log(-x) + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

const QuadratureRule &cached_gauss_hermite(int n) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto &slot = cache[n];
  if (!slot) slot = std::make_unique<QuadratureRule>(gauss_hermite_nodes(n));
  return *slot;
}

const char *likelihood_name(Likelihood::Kind kind) {
  switch (kind) {
  case Likelihood::Kind::Gaussian:
    return "Gaussian";
  case Likelihood::Kind::CorrelatedGaussian:
    return "CorrelatedGaussian";
  case Likelihood::Kind::Bernoulli:
    return "Bernoulli";
  case Likelihood::Kind::Poisson:
    return "Poisson";
  }
  return "";
}

Likelihood Likelihood::gaussian(double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance))
    throw Error(ErrorCode::InvalidParameter, "noise variance must be positive");
  Likelihood lik(Kind::Gaussian, ClosedForm{});
  lik.variance_ = variance;
  return lik;
}

Likelihood Likelihood::correlated_gaussian(const Eigen::MatrixXd &Sigma) {
  Likelihood lik(Kind::CorrelatedGaussian, ClosedForm{});
  lik.sqrt_ = cholesky(Sigma);
  return lik;
}

Likelihood Likelihood::bernoulli() { return Likelihood(Kind::Bernoulli, GaussHermite{}); }

Likelihood Likelihood::poisson() { return Likelihood(Kind::Poisson, ClosedForm{}); }

double Likelihood::variance() const {
  if (kind_ != Kind::Gaussian)
    throw Error(ErrorCode::UnsupportedCombination, "only the Gaussian likelihood has a variance");
  return variance_;
}

Eigen::MatrixXd Likelihood::covariance() const {
  if (kind_ != Kind::CorrelatedGaussian)
    throw Error(ErrorCode::UnsupportedCombination, "only the correlated Gaussian has a covariance");
  const Eigen::MatrixXd L = sqrt_.dense();
  return L * L.transpose();
}

void Likelihood::visit_params(ParamVisitor &visitor, const std::string &prefix) {
  if (kind_ == Kind::Gaussian)
    visitor.visit(prefix + "variance", as_span(variance_), Transform::Positive);
  if (kind_ == Kind::CorrelatedGaussian)
    visitor.visit(prefix + "sqrt", sqrt_.packed(), Transform::LowerTriangularPositiveDiag,
                  sqrt_.dim());
}

void Likelihood::check_observations(const Eigen::Ref<const Eigen::MatrixXd> &Y) const {
  if (kind_ == Kind::Bernoulli) {
    if (!((Y.array() == 0.0) || (Y.array() == 1.0)).all())
      throw Error(ErrorCode::DataError, "Bernoulli observations must be 0 or 1");
  } else if (kind_ == Kind::Poisson) {
    if (!((Y.array() >= 0.0) && (Y.array() == Y.array().round())).all())
      throw Error(ErrorCode::DataError, "Poisson observations must be non-negative integers");
  } else if (kind_ == Kind::CorrelatedGaussian && Y.cols() != sqrt_.dim()) {
    throw Error(ErrorCode::ShapeMismatch,
                "correlated Gaussian over " + std::to_string(sqrt_.dim()) + " outputs got " +
                    std::to_string(Y.cols()));
  }
}

double Likelihood::point_log_density(double f, double y) const {
  switch (kind_) {
  case Kind::Gaussian:
    return -0.5 * (kLog2Pi + std::log(variance_)) - 0.5 * (y - f) * (y - f) / variance_;
  case Kind::Bernoulli:
    return log_normal_cdf(y > 0.5 ? f : -f);
  case Kind::Poisson:
    return y * f - std::exp(f) - std::lgamma(y + 1.0);
  case Kind::CorrelatedGaussian:
    break;
  }
  throw Error(ErrorCode::UnsupportedCombination, "correlated likelihood has no scalar density");
}

Eigen::VectorXd Likelihood::log_density(const Eigen::Ref<const Eigen::MatrixXd> &F,
                                        const Eigen::Ref<const Eigen::MatrixXd> &Y) const {
  if (F.rows() != Y.rows() || F.cols() != Y.cols())
    throw Error(ErrorCode::ShapeMismatch, "F and Y shapes differ");
  check_observations(Y);
  const Eigen::Index N = F.rows();
  Eigen::VectorXd out(N);
  if (kind_ == Kind::CorrelatedGaussian) {
    const double logdet = 2.0 * sqrt_.diagonal().array().log().sum();
    const Eigen::MatrixXd R = (Y - F).transpose();
    const Eigen::MatrixXd white = tri_solve(sqrt_, R);
    const double P = static_cast<double>(Y.cols());
    for (Eigen::Index n = 0; n < N; ++n)
      out(n) = -0.5 * (P * kLog2Pi + logdet) - 0.5 * white.col(n).squaredNorm();
    return out;
  }
  for (Eigen::Index n = 0; n < N; ++n) {
    double s = 0.0;
    for (Eigen::Index p = 0; p < F.cols(); ++p) s += point_log_density(F(n, p), Y(n, p));
    out(n) = s;
  }
  return out;
}

Expectation Likelihood::expectations(const Eigen::Ref<const Eigen::MatrixXd> &Fmu,
                                     const Tensor &Fvar,
                                     const Eigen::Ref<const Eigen::MatrixXd> &Y) const {
  check_shapes(Fmu, Fvar, &Y);
  check_observations(Y);
  const Eigen::Index N = Fmu.rows();
  const Eigen::Index P = Fmu.cols();
  const bool full = is_full(Fvar);
  if (full && std::holds_alternative<GaussHermite>(strategy_))
    throw Error(ErrorCode::UnsupportedCombination,
                "Gauss-Hermite quadrature is per output and cannot use output covariances");
  if (kind_ == Kind::CorrelatedGaussian && !full)
    throw Error(ErrorCode::ShapeMismatch, "correlated Gaussian needs N x P x P Fvar");
  if (kind_ != Kind::CorrelatedGaussian && full)
    throw Error(ErrorCode::ShapeMismatch, "factorized likelihoods need N x P Fvar");

  Expectation e{Eigen::VectorXd::Zero(N), Eigen::VectorXd::Zero(N)};

  if (const auto *mc = std::get_if<MonteCarlo>(&strategy_)) {
    if (mc->samples < 2) throw Error(ErrorCode::InvalidParameter, "need at least two samples");
    RngState rng(mc->seed);
    const Eigen::Index S = mc->samples;
    for (Eigen::Index n = 0; n < N; ++n) {
      Eigen::MatrixXd factor = Eigen::MatrixXd::Zero(P, P);
      if (full) {
        factor = psd_factor(point_cov(Fvar, n));
      } else {
        for (Eigen::Index p = 0; p < P; ++p) factor(p, p) = std::sqrt(std::max(Fvar(n, p), 0.0));
      }
      const Eigen::MatrixXd eps = standard_normal(rng, P, S);
      Eigen::MatrixXd F = (factor * eps).transpose();
      F.rowwise() += Fmu.row(n);
      const Eigen::MatrixXd Yn = Y.row(n).replicate(S, 1);
      const Eigen::VectorXd vals = log_density(F, Yn);
      const double mean = vals.mean();
      const double var = (vals.array() - mean).square().sum() / static_cast<double>(S - 1);
      e.value(n) = mean;
      e.std_error(n) = std::sqrt(var / static_cast<double>(S));
    }
    return e;
  }

  if (kind_ == Kind::CorrelatedGaussian) {
    const Eigen::MatrixXd Linv = tri_solve(sqrt_, Eigen::MatrixXd::Identity(P, P));
    const Eigen::MatrixXd Sinv = Linv.transpose() * Linv;
    const double logdet = 2.0 * sqrt_.diagonal().array().log().sum();
    for (Eigen::Index n = 0; n < N; ++n) {
      const Eigen::VectorXd r = (Y.row(n) - Fmu.row(n)).transpose();
      const Eigen::MatrixXd V = point_cov(Fvar, n);
      e.value(n) = -0.5 * (static_cast<double>(P) * kLog2Pi + logdet) - 0.5 * r.dot(Sinv * r) -
                   0.5 * Sinv.cwiseProduct(V).sum();
    }
    return e;
  }

  if (std::holds_alternative<ClosedForm>(strategy_)) {
    if (kind_ == Kind::Bernoulli)
      throw Error(ErrorCode::UnsupportedCombination,
                  "the probit Bernoulli expectation has no closed form");
    for (Eigen::Index n = 0; n < N; ++n)
      for (Eigen::Index p = 0; p < P; ++p) {
        const double mu = Fmu(n, p);
        const double v = Fvar(n, p);
        const double y = Y(n, p);
        if (kind_ == Kind::Gaussian)
          e.value(n) += -0.5 * (kLog2Pi + std::log(variance_)) -
                        0.5 * ((y - mu) * (y - mu) + v) / variance_;
        else
          e.value(n) += y * mu - std::exp(mu + 0.5 * v) - std::lgamma(y + 1.0);
      }
    return e;
  }

  const QuadratureRule &rule = cached_gauss_hermite(std::get<GaussHermite>(strategy_).nodes);
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index p = 0; p < P; ++p) {
      const double mu = Fmu(n, p);
      const double v = Fvar(n, p);
      const double y = Y(n, p);
      if (v == 0.0) {
        e.value(n) += point_log_density(mu, y);
        continue;
      }
      const double sd = std::sqrt(std::max(v, 0.0));
      double s = 0.0;
      for (Eigen::Index i = 0; i < rule.nodes.size(); ++i)
        s += rule.weights(i) * point_log_density(mu + sd * rule.nodes(i), y);
      e.value(n) += s;
    }
  return e;
}

Eigen::VectorXd Likelihood::variational_expectations(const Eigen::Ref<const Eigen::MatrixXd> &Fmu,
                                                     const Tensor &Fvar,
                                                     const Eigen::Ref<const Eigen::MatrixXd> &Y) const {
  return expectations(Fmu, Fvar, Y).value;
}

Likelihood Likelihood::marginalize_outputs(const std::vector<Eigen::Index> &subset) const {
  if (subset.empty()) throw Error(ErrorCode::EmptySubset, "no observed outputs selected");
  if (kind_ != Kind::CorrelatedGaussian) return *this;
  const Eigen::Index P = sqrt_.dim();
  for (auto s : subset)
    if (s < 0 || s >= P)
      throw Error(ErrorCode::ShapeMismatch, "output index " + std::to_string(s) + " out of range");
  const Eigen::MatrixXd Sigma = covariance();
  if (subset.size() == 1) {
    Likelihood lik = gaussian(Sigma(subset[0], subset[0]));
    if (!std::holds_alternative<ClosedForm>(strategy_)) lik.strategy_ = strategy_;
    return lik;
  }
  if (static_cast<Eigen::Index>(subset.size()) == P) {
    bool identity = true;
    for (Eigen::Index i = 0; i < P; ++i) identity = identity && subset[static_cast<std::size_t>(i)] == i;
    if (identity) return *this;
  }
  Likelihood lik = correlated_gaussian(Sigma(subset, subset));
  lik.strategy_ = strategy_;
  return lik;
}

std::pair<Eigen::MatrixXd, Tensor>
Likelihood::predict_observation_moments(const Eigen::Ref<const Eigen::MatrixXd> &Fmu,
                                        const Tensor &Fvar) const {
  check_shapes(Fmu, Fvar, nullptr);
  const Eigen::Index N = Fmu.rows();
  const Eigen::Index P = Fmu.cols();
  Eigen::MatrixXd Ymu = Fmu;
  Tensor Yvar = Fvar;
  switch (kind_) {
  case Kind::Gaussian:
    for (Eigen::Index n = 0; n < N; ++n)
      for (Eigen::Index p = 0; p < P; ++p) {
        if (is_full(Fvar))
          Yvar(n, p, p) += variance_;
        else
          Yvar(n, p) += variance_;
      }
    return {Ymu, Yvar};
  case Kind::CorrelatedGaussian: {
    if (P != sqrt_.dim()) throw Error(ErrorCode::ShapeMismatch, "output count mismatch");
    const Eigen::MatrixXd Sigma = covariance();
    for (Eigen::Index n = 0; n < N; ++n)
      for (Eigen::Index p = 0; p < P; ++p) {
        if (!is_full(Fvar)) {
          Yvar(n, p) += Sigma(p, p);
          continue;
        }
        for (Eigen::Index r = 0; r < P; ++r) Yvar(n, p, r) += Sigma(p, r);
      }
    return {Ymu, Yvar};
  }
  default:
    break;
  }
  if (is_full(Fvar)) throw Error(ErrorCode::ShapeMismatch, "factorized likelihoods need N x P Fvar");
  const int nodes = std::holds_alternative<GaussHermite>(strategy_)
                        ? std::get<GaussHermite>(strategy_).nodes
                        : 20;
  const QuadratureRule &rule = cached_gauss_hermite(nodes);
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index p = 0; p < P; ++p) {
      const double mu = Fmu(n, p);
      const double v = std::max(Fvar(n, p), 0.0);
      if (kind_ == Kind::Bernoulli) {
        const double prob = normal_cdf(mu / std::sqrt(1.0 + v));
        Ymu(n, p) = prob;
        Yvar(n, p) = prob * (1.0 - prob);
        continue;
      }
      double m1 = 0.0;
      double m2 = 0.0;
      for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
        const double rate = std::exp(mu + std::sqrt(v) * rule.nodes(i));
        m1 += rule.weights(i) * rate;
        m2 += rule.weights(i) * rate * rate;
      }
      Ymu(n, p) = m1;
      Yvar(n, p) = m1 + (m2 - m1 * m1);
    }
  return {Ymu, Yvar};
}

Eigen::VectorXd Likelihood::predict_log_density(const Eigen::Ref<const Eigen::MatrixXd> &Fmu,
                                                const Tensor &Fvar,
                                                const Eigen::Ref<const Eigen::MatrixXd> &Y) const {
  check_shapes(Fmu, Fvar, &Y);
  check_observations(Y);
  const Eigen::Index N = Fmu.rows();
  const Eigen::Index P = Fmu.cols();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(N);
  if (kind_ == Kind::Gaussian || kind_ == Kind::CorrelatedGaussian) {
    const auto [Ymu, Yvar] = predict_observation_moments(Fmu, Fvar);
    for (Eigen::Index n = 0; n < N; ++n) {
      Eigen::MatrixXd V = Eigen::MatrixXd::Zero(P, P);
      if (is_full(Yvar))
        V = point_cov(Yvar, n);
      else
        for (Eigen::Index p = 0; p < P; ++p) V(p, p) = Yvar(n, p);
      const LowerTriangular L = cholesky(0.5 * (V + V.transpose()));
      const Eigen::VectorXd r = (Y.row(n) - Ymu.row(n)).transpose();
      out(n) = -0.5 * (static_cast<double>(P) * kLog2Pi) - L.diagonal().array().log().sum() -
               0.5 * tri_solve(L, r).squaredNorm();
    }
    return out;
  }
  if (is_full(Fvar)) throw Error(ErrorCode::ShapeMismatch, "factorized likelihoods need N x P Fvar");
  const int nodes = std::holds_alternative<GaussHermite>(strategy_)
                        ? std::get<GaussHermite>(strategy_).nodes
                        : 20;
  const QuadratureRule &rule = cached_gauss_hermite(nodes);
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index p = 0; p < P; ++p) {
      const double mu = Fmu(n, p);
      const double v = std::max(Fvar(n, p), 0.0);
      const double y = Y(n, p);
      if (kind_ == Kind::Bernoulli) {
        const double z = mu / std::sqrt(1.0 + v);
        out(n) += log_normal_cdf(y > 0.5 ? z : -z);
        continue;
      }
      Eigen::VectorXd terms(rule.nodes.size());
      for (Eigen::Index i = 0; i < rule.nodes.size(); ++i)
        terms(i) = std::log(rule.weights(i)) + point_log_density(mu + std::sqrt(v) * rule.nodes(i), y);
      out(n) += log_sum_exp(terms);
    }
  return out;
}

} // namespace ivgp
