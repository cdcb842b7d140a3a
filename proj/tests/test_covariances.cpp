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

#include <random>

#include "ivgp/covariances.hpp"
#include "ivgp/errors.hpp"
#include "oracles.hpp"

namespace ivgp {
namespace {

using Family = BaseKernel::Family;

TEST(Covariances, InducingPointsSingleOutput) {
  std::mt19937_64 rng(31);
  const Eigen::MatrixXd Z = oracle::random_matrix(rng, 4, 2), X = oracle::random_matrix(rng, 6, 2);
  const auto k = BaseKernel::make(Family::Matern32, 1.4, 0.8);
  const Eigen::VectorXd ls = Eigen::VectorXd::Constant(1, 0.8);
  const StructuredPSD K = kuu(InducingPoints(Z), *k, 1e-6);
  EXPECT_LT(oracle::max_abs_diff(K.densify(), oracle::gram("matern32", 1.4, ls, Z, Z) + 1e-6 * Eigen::MatrixXd::Identity(4, 4)),
            1e-14);
  const KufResult r = kuf(InducingPoints(Z), *k, X);
  EXPECT_LT(oracle::max_abs_diff(std::get<Eigen::MatrixXd>(r), oracle::gram("matern32", 1.4, ls, Z, X)), 1e-14);
}

// u = int N(t; z, s^2) f(t) dt in one dimension, by quadrature.
TEST(Covariances, MultiscaleMatchesNumericalIntegration) {
  const double var = 1.3, ell = 0.7;
  const auto k = BaseKernel::make(Family::SquaredExponential, var, ell);
  Eigen::MatrixXd Z(2, 1), S(2, 1), X(3, 1);
  Z << -0.3, 0.5;
  S << 0.2, 0.6;
  X << -1.0, 0.1, 0.9;
  const Multiscale iv(Z, S);
  const Eigen::MatrixXd Kuf = std::get<Eigen::MatrixXd>(kuf(iv, *k, X));
  auto kf = [&](double a, double b) { return var * std::exp(-0.5 * (a - b) * (a - b) / (ell * ell)); };
  auto window = [](double t, double z, double s) {
    return std::exp(-0.5 * (t - z) * (t - z) / (s * s)) / (s * std::sqrt(2.0 * oracle::kPi));
  };
  for (int m = 0; m < 2; ++m)
    for (int n = 0; n < 3; ++n) {
      const double ref = oracle::simpson([&](double t) { return window(t, Z(m), S(m)) * kf(t, X(n)); },
                                         Z(m) - 12 * S(m), Z(m) + 12 * S(m));
      EXPECT_NEAR(Kuf(m, n), ref, 1e-9);
    }
  const Eigen::MatrixXd Kuu = kuu(iv, *k, 0.0).densify();
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      auto inner = [&](double t) {
        return window(t, Z(a), S(a)) *
               oracle::simpson([&](double u) { return window(u, Z(b), S(b)) * kf(t, u); }, Z(b) - 10 * S(b),
                               Z(b) + 10 * S(b), 400);
      };
      EXPECT_NEAR(Kuu(a, b), oracle::simpson(inner, Z(a) - 10 * S(a), Z(a) + 10 * S(a), 400), 1e-8);
    }
}

TEST(Covariances, MultiscaleWithUnsupportedKernelHasNoImplementation) {
  const Multiscale iv(Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Ones(2, 1));
  const auto k = BaseKernel::make(Family::Matern32, 1.0);
  try {
    kuu(iv, *k);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::NoImplementation);
  }
}

TEST(Covariances, PatchesSumOverImagePatches) {
  std::mt19937_64 rng(32);
  Convolutional k(BaseKernel::make(Family::SquaredExponential, 0.7, 1.2), 3, 3, 2, 2);
  const Eigen::MatrixXd Z = oracle::random_matrix(rng, 3, 4), X = oracle::random_matrix(rng, 2, 9);
  const Eigen::VectorXd ls = Eigen::VectorXd::Constant(1, 1.2);
  const InducingPatches iv(Z);
  EXPECT_LT(oracle::max_abs_diff(kuu(iv, k).densify(), oracle::gram("sqexp", 0.7, ls, Z, Z)), 1e-14);
  const Eigen::MatrixXd Kuf = std::get<Eigen::MatrixXd>(kuf(iv, k, X));
  const Tensor patches = extract_patches(X, 3, 3, 2, 2);
  for (Eigen::Index m = 0; m < 3; ++m)
    for (Eigen::Index n = 0; n < 2; ++n) {
      double s = 0.0;
      for (Eigen::Index p = 0; p < 4; ++p) {
        Eigen::VectorXd patch(4);
        for (int i = 0; i < 4; ++i) patch(i) = patches(n, p, i);
        s += oracle::k_point("sqexp", 0.7, ls, Z.row(m).transpose(), patch);
      }
      EXPECT_NEAR(Kuf(m, n), s, 1e-13);
    }
}

TEST(Covariances, LatentInducingVariablesAreBlockDiagonal) {
  std::mt19937_64 rng(33);
  std::vector<Cloned<SingleOutputKernel>> ks;
  ks.emplace_back(BaseKernel::make(Family::SquaredExponential, 1.0, 0.5));
  ks.emplace_back(BaseKernel::make(Family::Matern52, 2.0, 0.9));
  LinearCoregionalization lmc(ks, oracle::random_matrix(rng, 3, 2));
  std::vector<Cloned<InducingVariable>> parts;
  parts.emplace_back(std::make_unique<InducingPoints>(oracle::random_matrix(rng, 3, 1)));
  parts.emplace_back(std::make_unique<InducingPoints>(oracle::random_matrix(rng, 5, 1)));
  const SeparateIndependentInducingVariables iv(parts);
  const StructuredPSD K = kuu(iv, lmc, 0.0);
  ASSERT_TRUE(K.is_block_diagonal());
  EXPECT_EQ(K.num_blocks(), 2);
  EXPECT_EQ(K.dim(), 8);
  const auto &Z1 = dynamic_cast<const InducingPoints &>(iv.part(1)).Z();
  EXPECT_LT(oracle::max_abs_diff(K.block(1), oracle::gram("matern52", 2.0, Eigen::VectorXd::Constant(1, 0.9), Z1, Z1)),
            1e-14);
  const Eigen::MatrixXd X = oracle::random_matrix(rng, 4, 1);
  const auto blocks = std::get<std::vector<Eigen::MatrixXd>>(kuf(iv, lmc, X));
  ASSERT_EQ(blocks.size(), 2u);
  EXPECT_EQ(blocks[1].rows(), 5);
  EXPECT_EQ(blocks[1].cols(), 4);

  SharedIndependent shared(BaseKernel::make(Family::SquaredExponential, 1.0, 0.5), 4);
  const SharedIndependentInducingVariables siv(std::make_unique<InducingPoints>(oracle::random_matrix(rng, 3, 1)));
  const StructuredPSD S = kuu(siv, shared, 0.0);
  EXPECT_EQ(S.num_blocks(), 4);
  EXPECT_EQ(S.dim(), 12);
}

TEST(Covariances, InducingPointsUnderMultioutputKernelUseFullGram) {
  std::mt19937_64 rng(34);
  const Eigen::MatrixXd W = oracle::random_matrix(rng, 2, 2);
  IntrinsicCoregionalization k(BaseKernel::make(Family::SquaredExponential, 1.0, 0.6), W);
  const Eigen::MatrixXd Z = oracle::random_matrix(rng, 3, 1), X = oracle::random_matrix(rng, 4, 1);
  const Eigen::MatrixXd Kuu = kuu(InducingPoints(Z), k, 0.0).densify();
  EXPECT_LT(oracle::max_abs_diff(Kuu, mo_k(k, Z, true).as_matrix(6, 6)), 1e-14);
  const Tensor Kuf = std::get<Tensor>(kuf(InducingPoints(Z), k, X));
  ASSERT_EQ(Kuf.shape(), (Tensor::Shape{3, 2, 4, 2}));
  EXPECT_LT(oracle::max_abs_diff(Kuf.as_matrix(6, 8), mo_k(k, Z, X, true).as_matrix(6, 8)), 1e-14);
}

} // namespace
} // namespace ivgp
