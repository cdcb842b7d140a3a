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

#include "ivgp/errors.hpp"
#include "ivgp/likelihoods.hpp"
#include "oracles.hpp"

namespace ivgp {
namespace {

Tensor column_var(const Eigen::MatrixXd &v) {
  Tensor t({v.rows(), v.cols()});
  for (Eigen::Index n = 0; n < v.rows(); ++n)
    for (Eigen::Index p = 0; p < v.cols(); ++p) t(n, p) = v(n, p);
  return t;
}

double gaussian_closed(double mu, double v, double y, double s2) {
  return -0.5 * std::log(2.0 * oracle::kPi * s2) - ((y - mu) * (y - mu) + v) / (2.0 * s2);
}

TEST(Gaussian, LogDensityAtModeIsZero) {
  const Likelihood lik = Likelihood::gaussian(1.0 / (2.0 * oracle::kPi));
  const Eigen::MatrixXd f = Eigen::MatrixXd::Constant(1, 1, 0.3);
  EXPECT_NEAR(lik.variational_expectations(f, column_var(Eigen::MatrixXd::Zero(1, 1)), f)(0), 0.0, 1e-15);
}

TEST(Gaussian, ClosedFormMatchesHandFormula) {
  std::mt19937_64 rng(61);
  for (int i = 0; i < 50; ++i) {
    const double mu = oracle::uniform(rng, -3, 3), v = oracle::uniform(rng, 0, 2), y = oracle::uniform(rng, -3, 3),
                 s2 = oracle::uniform(rng, 0.01, 2);
    const Likelihood lik = Likelihood::gaussian(s2);
    const double got = lik.variational_expectations(Eigen::MatrixXd::Constant(1, 1, mu),
                                                    column_var(Eigen::MatrixXd::Constant(1, 1, v)),
                                                    Eigen::MatrixXd::Constant(1, 1, y))(0);
    EXPECT_NEAR(got, gaussian_closed(mu, v, y, s2), 1e-12);
  }
}

TEST(Gaussian, QuadratureMatchesClosedForm) {
  std::mt19937_64 rng(62);
  for (int i = 0; i < 100; ++i) {
    const Eigen::MatrixXd mu = oracle::random_matrix(rng, 1, 1), y = oracle::random_matrix(rng, 1, 1);
    const Tensor v = column_var(Eigen::MatrixXd::Constant(1, 1, oracle::uniform(rng, 0.0, 2.0)));
    Likelihood lik = Likelihood::gaussian(oracle::uniform(rng, 0.05, 2.0));
    const double closed = lik.variational_expectations(mu, v, y)(0);
    lik.set_strategy(GaussHermite{20});
    EXPECT_NEAR(lik.variational_expectations(mu, v, y)(0), closed, 1e-10);
  }
}

TEST(Gaussian, MonteCarloWithinFourStandardErrors) {
  Likelihood lik = Likelihood::gaussian(0.3);
  const Eigen::MatrixXd mu = Eigen::MatrixXd::Constant(1, 1, 0.2), y = Eigen::MatrixXd::Constant(1, 1, -0.4);
  const Tensor v = column_var(Eigen::MatrixXd::Constant(1, 1, 0.5));
  const double closed = lik.variational_expectations(mu, v, y)(0);
  lik.set_strategy(MonteCarlo{1000000, 3});
  const Expectation e = lik.expectations(mu, v, y);
  EXPECT_GT(e.std_error(0), 0.0);
  EXPECT_LT(std::abs(e.value(0) - closed), 4.0 * e.std_error(0));
}

TEST(CorrelatedGaussian, ClosedFormMatchesDenseFormula) {
  std::mt19937_64 rng(63);
  const Eigen::MatrixXd Sigma = oracle::random_spd(rng, 3);
  const Likelihood lik = Likelihood::correlated_gaussian(Sigma);
  const Eigen::MatrixXd mu = oracle::random_matrix(rng, 2, 3), y = oracle::random_matrix(rng, 2, 3);
  Tensor V({2, 3, 3});
  std::vector<Eigen::MatrixXd> Vs;
  for (Eigen::Index n = 0; n < 2; ++n) {
    Vs.push_back(oracle::random_spd(rng, 3));
    V.slice(n) = Vs.back();
  }
  const Eigen::VectorXd got = lik.variational_expectations(mu, V, y);
  const Eigen::MatrixXd Si = Sigma.inverse();
  for (Eigen::Index n = 0; n < 2; ++n) {
    const Eigen::VectorXd r = (y.row(n) - mu.row(n)).transpose();
    const double want = -0.5 * oracle::logdet(2.0 * oracle::kPi * Sigma) - 0.5 * r.dot(Si * r) -
                        0.5 * (Si * Vs[static_cast<std::size_t>(n)]).trace();
    EXPECT_NEAR(got(n), want, 1e-10);
  }
}

TEST(CorrelatedGaussian, FactorizedVarianceAndStrategiesRejected) {
  Likelihood lik = Likelihood::correlated_gaussian(Eigen::MatrixXd::Identity(2, 2));
  const Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(1, 2);
  try {
    lik.variational_expectations(mu, column_var(Eigen::MatrixXd::Ones(1, 2)), mu);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
  lik.set_strategy(GaussHermite{20});
  Tensor V({1, 2, 2});
  V.slice(0) = Eigen::MatrixXd::Identity(2, 2);
  try {
    lik.variational_expectations(mu, V, mu);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedCombination);
  }
}

TEST(CorrelatedGaussian, MarginalizeOutputsSlicesSigma) {
  std::mt19937_64 rng(64);
  const Eigen::MatrixXd Sigma = oracle::random_spd(rng, 3);
  const Likelihood lik = Likelihood::correlated_gaussian(Sigma);
  EXPECT_LT(oracle::max_abs_diff(lik.marginalize_outputs({0, 1, 2}).covariance(), Sigma), 1e-12);
  const Likelihood one = lik.marginalize_outputs({1});
  EXPECT_EQ(one.kind(), Likelihood::Kind::Gaussian);
  EXPECT_NEAR(one.variance(), Sigma(1, 1), 1e-12);
  Eigen::MatrixXd sub(2, 2);
  sub << Sigma(0, 0), Sigma(0, 2), Sigma(2, 0), Sigma(2, 2);
  EXPECT_LT(oracle::max_abs_diff(lik.marginalize_outputs({0, 2}).covariance(), sub), 1e-12);
  try {
    lik.marginalize_outputs({});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptySubset);
  }
}

TEST(Bernoulli, SymmetricLinkAtZero) {
  const Likelihood lik = Likelihood::bernoulli();
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, 1), one = Eigen::MatrixXd::Ones(1, 1);
  EXPECT_NEAR(lik.variational_expectations(z, column_var(z), one)(0), -std::log(2.0), 1e-14);
}

TEST(Bernoulli, QuadratureMatchesIntegrationOracle) {
  std::mt19937_64 rng(65);
  const Likelihood lik = Likelihood::bernoulli();
  for (int i = 0; i < 20; ++i) {
    const double mu = oracle::uniform(rng, -3, 3), v = oracle::uniform(rng, 0.01, 3);
    const double y = (i % 2 == 0) ? 1.0 : 0.0;
    const double want = oracle::gaussian_expectation(
        [&](double f) {
          const double p = 0.5 * std::erfc(-f / std::sqrt(2.0));
          return y > 0.5 ? std::log(p) : std::log1p(-p);
        },
        mu, v);
    EXPECT_NEAR(lik.variational_expectations(Eigen::MatrixXd::Constant(1, 1, mu), column_var(Eigen::MatrixXd::Constant(1, 1, v)),
                                             Eigen::MatrixXd::Constant(1, 1, y))(0),
                want, 1e-4 * (1.0 + std::abs(want)));
  }
}

TEST(Bernoulli, PredictiveMeanIsProbit) {
  const Likelihood lik = Likelihood::bernoulli();
  const Eigen::MatrixXd mu = Eigen::MatrixXd::Constant(1, 1, 0.7);
  auto [m, v] = lik.predict_observation_moments(mu, column_var(Eigen::MatrixXd::Zero(1, 1)));
  EXPECT_NEAR(m(0, 0), normal_cdf(0.7), 1e-12);
  EXPECT_NEAR(v(0, 0), normal_cdf(0.7) * (1.0 - normal_cdf(0.7)), 1e-12);
}

TEST(Poisson, ExpectationHasClosedFormOracle) {
  std::mt19937_64 rng(66);
  const Likelihood lik = Likelihood::poisson();
  for (int i = 0; i < 20; ++i) {
    const double mu = oracle::uniform(rng, -1, 1), v = oracle::uniform(rng, 0.01, 1), y = std::floor(oracle::uniform(rng, 0, 6));
    const double want = y * mu - std::exp(mu + 0.5 * v) - std::lgamma(y + 1.0);
    EXPECT_NEAR(lik.variational_expectations(Eigen::MatrixXd::Constant(1, 1, mu), column_var(Eigen::MatrixXd::Constant(1, 1, v)),
                                             Eigen::MatrixXd::Constant(1, 1, y))(0),
                want, 1e-8);
  }
}

TEST(Poisson, PredictiveMomentsMatchSampling) {
  const Likelihood lik = Likelihood::poisson();
  const double mu = 0.3, v = 0.4;
  auto [m, var] = lik.predict_observation_moments(Eigen::MatrixXd::Constant(1, 1, mu), column_var(Eigen::MatrixXd::Constant(1, 1, v)));
  std::mt19937_64 rng(67);
  std::normal_distribution<double> nd(mu, std::sqrt(v));
  const int S = 1000000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < S; ++i) {
    std::poisson_distribution<int> pd(std::exp(nd(rng)));
    const double y = pd(rng);
    s1 += y;
    s2 += y * y;
  }
  const double em = s1 / S, ev = s2 / S - em * em;
  EXPECT_NEAR(m(0, 0), em, 4.0 * std::sqrt(ev / S));
  EXPECT_NEAR(var(0, 0), ev, 0.02 * ev);
}

TEST(Quadrature, TwentyAndFiftyNodesAgree) {
  std::mt19937_64 rng(68);
  for (Likelihood lik : {Likelihood::bernoulli(), Likelihood::poisson()}) {
    for (int i = 0; i < 20; ++i) {
      const Eigen::MatrixXd mu = Eigen::MatrixXd::Constant(1, 1, oracle::uniform(rng, -1, 1));
      const Tensor v = column_var(Eigen::MatrixXd::Constant(1, 1, oracle::uniform(rng, 0.01, 0.5)));
      const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(1, 1, static_cast<double>(i % 2));
      lik.set_strategy(GaussHermite{20});
      const double a = lik.variational_expectations(mu, v, y)(0);
      lik.set_strategy(GaussHermite{50});
      EXPECT_NEAR(a, lik.variational_expectations(mu, v, y)(0), 1e-8);
    }
  }
}

TEST(AllVariants, ZeroVarianceGivesPointLogDensity) {
  std::mt19937_64 rng(69);
  const Eigen::MatrixXd F = oracle::random_matrix(rng, 4, 1);
  Eigen::MatrixXd Ybin(4, 1), Ycount(4, 1), Yreal = oracle::random_matrix(rng, 4, 1);
  Ybin << 1, 0, 1, 0;
  Ycount << 0, 3, 1, 2;
  const Tensor zero = column_var(Eigen::MatrixXd::Zero(4, 1));
  for (const auto &[lik, Y] : std::vector<std::pair<Likelihood, Eigen::MatrixXd>>{
           {Likelihood::gaussian(0.4), Yreal}, {Likelihood::bernoulli(), Ybin}, {Likelihood::poisson(), Ycount}}) {
    EXPECT_LT(oracle::max_abs_diff(lik.variational_expectations(F, zero, Y), lik.log_density(F, Y)), 1e-12);
  }
}

TEST(Validation, BadInputsThrow) {
  EXPECT_THROW(Likelihood::gaussian(0.0), Error);
  EXPECT_THROW(Likelihood::gaussian(-1.0), Error);
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 2, 2, 1;
  EXPECT_THROW(Likelihood::correlated_gaussian(bad), Error);
  const Likelihood lik = Likelihood::gaussian(1.0);
  EXPECT_THROW(lik.variational_expectations(Eigen::MatrixXd::Zero(2, 1), column_var(Eigen::MatrixXd::Zero(3, 1)),
                                            Eigen::MatrixXd::Zero(2, 1)),
               Error);
  EXPECT_THROW(Likelihood::bernoulli().log_density(Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Constant(1, 1, 0.5)), Error);
}

TEST(Gaussian, ObservationNoiseAddsVariance) {
  const Likelihood lik = Likelihood::gaussian(0.25);
  const Eigen::MatrixXd v = Eigen::MatrixXd::Constant(3, 1, 0.1);
  auto [m, var] = lik.predict_observation_moments(Eigen::MatrixXd::Zero(3, 1), column_var(v));
  for (Eigen::Index n = 0; n < 3; ++n) EXPECT_DOUBLE_EQ(var(n, 0), 0.35);
}

} // namespace
} // namespace ivgp
