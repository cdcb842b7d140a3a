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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ivgp/covariances.hpp"
#include "ivgp/divergences.hpp"
#include "ivgp/models.hpp"
#include "oracles.hpp"

namespace ivgp {
namespace {

using Family = BaseKernel::Family;

struct Regression {
  Eigen::MatrixXd X, Y;
};

Regression toy(std::mt19937_64 &rng, Eigen::Index N) {
  Regression r{Eigen::MatrixXd(N, 1), Eigen::MatrixXd(N, 1)};
  for (Eigen::Index n = 0; n < N; ++n) {
    r.X(n, 0) = -2.0 + 4.0 * static_cast<double>(n) / static_cast<double>(N - 1);
    r.Y(n, 0) = std::sin(3.0 * r.X(n, 0)) + 0.1 * oracle::random_matrix(rng, 1, 1)(0, 0);
  }
  return r;
}

SVGPModel svgp(double var, double ls, double noise, const Eigen::MatrixXd &Z, bool whiten) {
  return SVGPModel::make(Cloned<Kernel>(BaseKernel::make(Family::SquaredExponential, var, ls)), Likelihood::gaussian(noise),
                         Cloned<InducingVariable>(std::make_unique<InducingPoints>(Z)), whiten);
}

void randomize_q(std::mt19937_64 &rng, VariationalGaussian &q) {
  q.q_mu = oracle::random_matrix(rng, q.size(), 1);
  q.q_sqrt = LowerTriangular::from_dense(oracle::random_lower(rng, q.size()));
}

double oracle_elbo(const SVGPModel &m, const Regression &d) {
  const auto &k = dynamic_cast<const BaseKernel &>(*m.kernel);
  const Eigen::MatrixXd &Z = dynamic_cast<const InducingPoints &>(*m.inducing).Z();
  const Eigen::Index M = Z.rows();
  const Eigen::MatrixXd Kuu =
      oracle::gram("sqexp", k.params().variance, k.params().lengthscales, Z, Z) + m.jitter * Eigen::MatrixXd::Identity(M, M);
  const Eigen::MatrixXd Kuf = oracle::gram("sqexp", k.params().variance, k.params().lengthscales, Z, d.X);
  Eigen::VectorXd mu = m.q.q_mu;
  Eigen::MatrixXd S = m.q.dense_sqrt() * m.q.dense_sqrt().transpose();
  if (m.q.whiten) {
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(Kuu).matrixL();
    mu = L * mu;
    S = L * S * L.transpose();
  }
  return oracle::svgp_elbo(Kuu, Kuf, Eigen::VectorXd::Constant(d.X.rows(), k.params().variance), d.Y.col(0),
                           m.likelihood.variance(), mu, S);
}

double gpr_value(double var, double ls, double noise, const Regression &d) {
  return oracle::gpr_log_marginal(oracle::gram("sqexp", var, Eigen::VectorXd::Constant(1, ls), d.X, d.X), d.Y.col(0), noise);
}

TEST(Gpr, TrivialCases) {
  GPRModel one{Cloned<Kernel>(BaseKernel::make(Family::SquaredExponential, 1.0)), 1e-300, Eigen::MatrixXd::Zero(1, 1),
               Eigen::MatrixXd::Zero(1, 1)};
  EXPECT_NEAR(gpr_log_marginal(one), -0.5 * std::log(2.0 * oracle::kPi), 1e-12);
  std::mt19937_64 rng(71);
  const Eigen::MatrixXd X = oracle::random_matrix(rng, 5, 1), Y = oracle::random_matrix(rng, 5, 1);
  GPRModel white{Cloned<Kernel>(BaseKernel::make(Family::White, 0.7)), 0.2, X, Y};
  double want = 0.0;
  for (Eigen::Index n = 0; n < 5; ++n) want += -0.5 * std::log(2.0 * oracle::kPi * 0.9) - 0.5 * Y(n, 0) * Y(n, 0) / 0.9;
  EXPECT_NEAR(gpr_log_marginal(white), want, 1e-12);
}

TEST(Gpr, MatchesDenseOracle) {
  std::mt19937_64 rng(72);
  const Eigen::MatrixXd X = oracle::random_matrix(rng, 8, 2), Y = oracle::random_matrix(rng, 8, 1), Xs = oracle::random_matrix(rng, 4, 2);
  GPRModel m{Cloned<Kernel>(BaseKernel::make(Family::Matern32, 1.3, 0.7)), 0.15, X, Y};
  const Eigen::VectorXd ls = Eigen::VectorXd::Constant(1, 0.7);
  const Eigen::MatrixXd K = oracle::gram("matern32", 1.3, ls, X, X);
  EXPECT_NEAR(gpr_log_marginal(m), oracle::gpr_log_marginal(K, Y.col(0), 0.15), 1e-10);
  const Eigen::MatrixXd Ky = K + 0.15 * Eigen::MatrixXd::Identity(8, 8);
  const Eigen::MatrixXd Ksf = oracle::gram("matern32", 1.3, ls, Xs, X);
  const PosteriorMoments pm = gpr_predict(m, Xs, true);
  EXPECT_LT(oracle::max_abs_diff(pm.mean, Ksf * Ky.ldlt().solve(Y)), 1e-10);
  EXPECT_LT(oracle::max_abs_diff(pm.cov.slice(0), oracle::gram("matern32", 1.3, ls, Xs, Xs) - Ksf * Ky.ldlt().solve(Ksf.transpose())),
            1e-10);
}

TEST(Gpr, LimitsOfThePredictive) {
  std::mt19937_64 rng(73);
  const Regression d = toy(rng, 10);
  GPRModel m{Cloned<Kernel>(BaseKernel::make(Family::SquaredExponential, 1.4, 0.5)), 1e-10, d.X, d.Y};
  const PosteriorMoments far = gpr_predict(m, Eigen::MatrixXd::Constant(1, 1, 100.0));
  EXPECT_NEAR(far.mean(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(far.cov(0, 0), 1.4, 1e-12);
  EXPECT_LT(oracle::max_abs_diff(gpr_predict(m, d.X).mean, d.Y), 1e-4);
}

TEST(Svgp, ElboMatchesDenseOracle) {
  std::mt19937_64 rng(74);
  const Regression d = toy(rng, 12);
  for (bool whiten : {true, false}) {
    for (int t = 0; t < 10; ++t) {
      SVGPModel m = svgp(oracle::uniform(rng, 0.5, 2), oracle::uniform(rng, 0.3, 1), oracle::uniform(rng, 0.05, 1),
                         oracle::random_matrix(rng, 5, 1), whiten);
      randomize_q(rng, m.q);
      EXPECT_NEAR(svgp_elbo(m, d.X, d.Y), oracle_elbo(m, d), 1e-8 * (1.0 + std::abs(oracle_elbo(m, d))));
    }
  }
}

TEST(Svgp, LowerBoundsTheMarginalLikelihood) {
  std::mt19937_64 rng(75);
  const Regression d = toy(rng, 15);
  for (int t = 0; t < 50; ++t) {
    const double var = oracle::uniform(rng, 0.3, 2), ls = oracle::uniform(rng, 0.2, 1.5), noise = oracle::uniform(rng, 0.01, 1);
    SVGPModel m = svgp(var, ls, noise, oracle::random_matrix(rng, 6, 1), t % 2 == 0);
    randomize_q(rng, m.q);
    EXPECT_LE(svgp_elbo(m, d.X, d.Y), gpr_value(var, ls, noise, d) + 1e-6);
  }
}

TEST(Svgp, OptimalQCollapsesToTheMarginalLikelihood) {
  std::mt19937_64 rng(76);
  const Regression d = toy(rng, 30);
  for (bool whiten : {true, false}) {
    SVGPModel m = svgp(1.0, 0.6, 0.1, d.X, whiten);
    m.jitter = 1e-10;
    m.q = optimal_q(m, d.X, d.Y);
    EXPECT_NEAR(svgp_elbo(m, d.X, d.Y), gpr_value(1.0, 0.6, 0.1, d), 1e-6);
  }
}

TEST(Svgp, OptimalQBeatsPerturbations) {
  std::mt19937_64 rng(77);
  const Regression d = toy(rng, 20);
  SVGPModel m = svgp(1.0, 0.5, 0.2, oracle::random_matrix(rng, 6, 1), true);
  m.q = optimal_q(m, d.X, d.Y);
  const double best = svgp_elbo(m, d.X, d.Y);
  for (int i = 0; i < 6; ++i) {
    for (double delta : {-1e-3, 1e-3}) {
      SVGPModel p = m;
      p.q.q_mu(i) += delta;
      EXPECT_LT(svgp_elbo(p, d.X, d.Y), best);
    }
  }
  for (int t = 0; t < 20; ++t) {
    SVGPModel p = m;
    randomize_q(rng, p.q);
    EXPECT_LT(svgp_elbo(p, d.X, d.Y), best);
  }
  SVGPModel vague = svgp(1.0, 0.5, 1e8, dynamic_cast<const InducingPoints &>(*m.inducing).Z(), true);
  EXPECT_LT(optimal_q(vague, d.X, d.Y).q_mu.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Svgp, WhiteningInvariance) {
  std::mt19937_64 rng(78);
  const Regression d = toy(rng, 10);
  for (int t = 0; t < 10; ++t) {
    const Eigen::MatrixXd Z = oracle::random_matrix(rng, 4, 1);
    SVGPModel w = svgp(1.2, 0.7, 0.3, Z, true);
    randomize_q(rng, w.q);
    SVGPModel u = svgp(1.2, 0.7, 0.3, Z, false);
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(kuu(*w.inducing, *w.kernel, w.jitter).densify()).matrixL();
    u.q.q_mu = L * w.q.q_mu;
    u.q.q_sqrt = LowerTriangular::from_dense(L * w.q.dense_sqrt());
    EXPECT_NEAR(svgp_elbo(w, d.X, d.Y), svgp_elbo(u, d.X, d.Y), 1e-8);
  }
}

TEST(Svgp, MinibatchAverageIsUnbiased) {
  std::mt19937_64 rng(79);
  const Regression d = toy(rng, 30);
  for (Likelihood lik : {Likelihood::gaussian(0.2), Likelihood::bernoulli()}) {
    SVGPModel m = svgp(1.0, 0.5, 0.2, oracle::random_matrix(rng, 5, 1), true);
    m.likelihood = lik;
    randomize_q(rng, m.q);
    Eigen::MatrixXd Y = d.Y;
    if (lik.kind() == Likelihood::Kind::Bernoulli) Y = (d.Y.array() > 0).cast<double>();
    const double full = svgp_elbo(m, d.X, Y);
    for (Eigen::Index b : {1, 5, 6, 10, 30}) {
      double sum = 0.0;
      const Eigen::Index batches = 30 / b;
      for (Eigen::Index i = 0; i < batches; ++i)
        sum += svgp_elbo(m, d.X.middleRows(i * b, b), Y.middleRows(i * b, b), 30.0 / static_cast<double>(b));
      EXPECT_NEAR(sum / static_cast<double>(batches), full, 1e-9);
    }
  }
}

TEST(Svgp, MeanFunctionShiftsOnlyTheMean) {
  std::mt19937_64 rng(80);
  SVGPModel m = svgp(1.0, 0.5, 0.2, oracle::random_matrix(rng, 4, 1), true);
  randomize_q(rng, m.q);
  const Eigen::MatrixXd X = oracle::random_matrix(rng, 5, 1);
  const PosteriorMoments base = svgp_predict_f(m, X, true);
  const PosteriorMoments cond = conditional(X, *m.inducing, *m.kernel, m.q, true, false, m.jitter);
  EXPECT_EQ(base.mean, cond.mean);
  m.mean = MeanFunction::constant(Eigen::VectorXd::Constant(1, 2.5));
  const PosteriorMoments shifted = svgp_predict_f(m, X, true);
  EXPECT_LT(oracle::max_abs_diff(shifted.mean, base.mean.array() + 2.5), 1e-14);
  EXPECT_EQ(shifted.cov, base.cov);
}

TEST(Svgp, HeterotopicMatchesHomotopic) {
  std::mt19937_64 rng(81);
  const Eigen::Index N = 8;
  const Eigen::MatrixXd X = oracle::random_matrix(rng, N, 1), Y = oracle::random_matrix(rng, N, 2);
  std::vector<Cloned<SingleOutputKernel>> ks;
  ks.emplace_back(BaseKernel::make(Family::SquaredExponential, 1.0, 0.6));
  ks.emplace_back(BaseKernel::make(Family::Matern52, 0.8, 0.9));
  SVGPModel m = SVGPModel::make(Cloned<Kernel>(std::make_unique<LinearCoregionalization>(ks, oracle::random_matrix(rng, 2, 2))),
                                Likelihood::gaussian(0.3),
                                Cloned<InducingVariable>(std::make_unique<SharedIndependentInducingVariables>(
                                    std::make_unique<InducingPoints>(oracle::random_matrix(rng, 3, 1)))));
  m.q.q_mu = oracle::random_matrix(rng, 6, 1);
  m.q.q_sqrt = std::vector<LowerTriangular>{LowerTriangular::from_dense(oracle::random_lower(rng, 3)),
                                            LowerTriangular::from_dense(oracle::random_lower(rng, 3))};
  Eigen::MatrixXd Xh(2 * N, 1);
  Eigen::VectorXd yh(2 * N);
  std::vector<Eigen::Index> idx;
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index p = 0; p < 2; ++p) {
      Xh(2 * n + p, 0) = X(n, 0);
      yh(2 * n + p) = Y(n, p);
      idx.push_back(p);
    }
  EXPECT_NEAR(svgp_elbo_heterotopic(m, Xh, idx, yh), svgp_elbo(m, X, Y), 1e-9);

  m.likelihood = Likelihood::correlated_gaussian(oracle::random_spd(rng, 2));
  EXPECT_NEAR(svgp_elbo_heterotopic(m, Xh, idx, yh), svgp_elbo(m, X, Y), 1e-9);
}

DGPLayer layer_from(const SVGPModel &m, Eigen::Index width) {
  return DGPLayer{m.kernel, m.inducing, m.q, m.mean, width};
}

TEST(Dgp, OneLayerEqualsSvgp) {
  std::mt19937_64 rng(82);
  const Regression d = toy(rng, 12);
  SVGPModel m = svgp(1.0, 0.6, 0.2, oracle::random_matrix(rng, 4, 1), true);
  randomize_q(rng, m.q);
  DGPModel dgp;
  dgp.layers.push_back(layer_from(m, 1));
  dgp.likelihood = m.likelihood;
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    RngState r(seed);
    EXPECT_EQ(dgp_elbo(dgp, d.X, d.Y, r), svgp_elbo(m, d.X, d.Y));
  }
}

TEST(Dgp, KlIsSumOfLayerKls) {
  std::mt19937_64 rng(83);
  DGPModel dgp;
  for (int l = 0; l < 3; ++l) {
    SVGPModel m = svgp(1.0 + l, 0.5, 0.2, oracle::random_matrix(rng, 3 + l, 1), l % 2 == 0);
    randomize_q(rng, m.q);
    dgp.layers.push_back(layer_from(m, 1));
  }
  double sum = 0.0;
  for (const auto &layer : dgp.layers) sum += prior_kl(*layer.inducing, *layer.kernel, layer.q, dgp.jitter);
  EXPECT_EQ(dgp_kl(dgp), sum);
}

TEST(Dgp, SeedDeterminismAndLayerValidation) {
  std::mt19937_64 rng(84);
  const Regression d = toy(rng, 10);
  DGPModel dgp;
  SVGPModel a = svgp(1.0, 0.6, 0.2, oracle::random_matrix(rng, 4, 1), true);
  randomize_q(rng, a.q);
  dgp.layers.push_back(layer_from(a, 1));
  dgp.layers.push_back(layer_from(a, 1));
  RngState r1(5), r2(5), r3(6);
  const double v1 = dgp_elbo(dgp, d.X, d.Y, r1);
  EXPECT_EQ(v1, dgp_elbo(dgp, d.X, d.Y, r2));
  EXPECT_NE(v1, dgp_elbo(dgp, d.X, d.Y, r3));
  dgp.layers[0].output_dim = 2;
  EXPECT_THROW(dgp.validate(1), Error);
}

// First layer passes inputs through with negligible noise; the ELBO then
// matches the second layer as a standalone SVGP in expectation.
TEST(Dgp, DegenerateFirstLayerMatchesSvgp) {
  std::mt19937_64 rng(85);
  const Regression d = toy(rng, 12);
  SVGPModel m = svgp(1.0, 0.6, 0.2, oracle::random_matrix(rng, 4, 1), true);
  randomize_q(rng, m.q);
  DGPModel dgp;
  DGPLayer first{Cloned<Kernel>(BaseKernel::make(Family::White, 1e-12)),
                 Cloned<InducingVariable>(std::make_unique<InducingPoints>(oracle::random_matrix(rng, 3, 1))),
                 VariationalGaussian::standard(3, true), MeanFunction::identity(), 1};
  dgp.layers.push_back(first);
  dgp.layers.push_back(layer_from(m, 1));
  dgp.likelihood = m.likelihood;
  std::vector<double> vals;
  for (std::uint64_t s = 0; s < 200; ++s) {
    RngState r(s);
    vals.push_back(dgp_elbo(dgp, d.X, d.Y, r));
  }
  double mean = 0.0, sq = 0.0;
  for (double v : vals) mean += v / 200.0;
  for (double v : vals) sq += (v - mean) * (v - mean) / 199.0;
  const double se = std::sqrt(sq / 200.0);
  EXPECT_LE(std::abs(mean - svgp_elbo(m, d.X, d.Y)), std::max(3.0 * se, 1e-6));
}

TEST(Uncertain, InputKlVanishesAtThePrior) {
  std::mt19937_64 rng(86);
  UncertainSVGPModel u{svgp(1.0, 0.5, 0.2, oracle::random_matrix(rng, 3, 2), true), Eigen::MatrixXd::Zero(5, 2),
                       Eigen::MatrixXd::Ones(5, 2), 1};
  EXPECT_NEAR(input_kl(u), 0.0, 1e-15);
  u.input_mean(0, 0) = 1.0;
  u.input_var(1, 1) = 2.0;
  EXPECT_NEAR(input_kl(u), 0.5 + 0.5 * (2.0 - 1.0 - std::log(2.0)), 1e-14);
  EXPECT_NEAR(input_kl(u, {0}), 0.5, 1e-14);
}

TEST(Uncertain, TinyVarianceRecoversSvgp) {
  std::mt19937_64 rng(87);
  const Regression d = toy(rng, 10);
  SVGPModel m = svgp(1.0, 0.6, 0.2, oracle::random_matrix(rng, 4, 1), true);
  randomize_q(rng, m.q);
  UncertainSVGPModel u{m, d.X, Eigen::MatrixXd::Constant(10, 1, 1e-6), 1};
  double total = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    RngState r(s);
    total += uncertain_elbo(u, d.Y, r) + input_kl(u);
  }
  EXPECT_NEAR(total / 200.0, svgp_elbo(m, d.X, d.Y), 0.01);
  RngState a(3), b(3);
  EXPECT_EQ(uncertain_elbo(u, d.Y, a), uncertain_elbo(u, d.Y, b));
}

} // namespace
} // namespace ivgp
