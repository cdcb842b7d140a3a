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

#include <array>
#include <random>

#include "ivgp/errors.hpp"
#include "ivgp/kernels.hpp"
#include "oracles.hpp"

namespace ivgp {
namespace {

using Family = BaseKernel::Family;

const std::pair<Family, const char *> kStationary[] = {{Family::SquaredExponential, "sqexp"},
                                                       {Family::Matern12, "matern12"},
                                                       {Family::Matern32, "matern32"},
                                                       {Family::Matern52, "matern52"}};

std::unique_ptr<BaseKernel> ard(Family f, double variance, Eigen::VectorXd ls) {
  return std::make_unique<BaseKernel>(f, KernelParams{variance, std::move(ls)});
}

TEST(BaseKernel, GramMatchesOracleForEveryFamily) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd X = oracle::random_matrix(rng, 6, 2), X2 = oracle::random_matrix(rng, 4, 2);
    Eigen::VectorXd ls(2);
    ls << oracle::uniform(rng, 0.2, 2.0), oracle::uniform(rng, 0.2, 2.0);
    const double var = oracle::uniform(rng, 0.1, 3.0);
    for (const auto &[f, name] : kStationary) {
      const auto k = ard(f, var, ls);
      EXPECT_LT(oracle::max_abs_diff(k->k_full(X, X2), oracle::gram(name, var, ls, X, X2)), 1e-13);
      EXPECT_LT(oracle::max_abs_diff(k->k_diag(X), k->k_full(X).diagonal()), 1e-15);
    }
    const auto lin = BaseKernel::make(Family::Linear, var);
    EXPECT_LT(oracle::max_abs_diff(lin->k_full(X, X2), oracle::gram("linear", var, ls, X, X2)), 1e-13);
    EXPECT_LT(oracle::max_abs_diff(lin->k_diag(X), lin->k_full(X).diagonal()), 1e-13);
  }
}

TEST(BaseKernel, GramIsSymmetricPositiveSemidefinite) {
  std::mt19937_64 rng(22);
  for (const auto &[f, name] : kStationary) {
    const auto k = BaseKernel::make(f, 1.3, 0.7);
    const Eigen::MatrixXd K = k->k_full(oracle::random_matrix(rng, 25, 3));
    EXPECT_LT(oracle::max_abs_diff(K, K.transpose()), 1e-15);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues().minCoeff(), -1e-10) << name;
  }
}

TEST(BaseKernel, WhiteNoiseOnlyOnTheDiagonalOfItself) {
  const auto k = BaseKernel::make(Family::White, 0.3);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 2);
  EXPECT_LT(oracle::max_abs_diff(k->k_full(X), 0.3 * Eigen::MatrixXd::Identity(3, 3)), 1e-16);
  EXPECT_EQ(k->k_full(X, X).norm(), 0.0);
  EXPECT_LT(oracle::max_abs_diff(k->k_diag(X), Eigen::VectorXd::Constant(3, 0.3)), 1e-16);
}

TEST(BaseKernel, ValidatesParametersAndInputs) {
  EXPECT_THROW(BaseKernel::make(Family::SquaredExponential, -1.0), Error);
  EXPECT_THROW(BaseKernel::make(Family::SquaredExponential, 1.0, 0.0), Error);
  const auto k = ard(Family::Matern32, 1.0, Eigen::Vector2d(1.0, 2.0));
  try {
    k->k_full(Eigen::MatrixXd::Ones(2, 3));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Patches, RasterOrder) {
  Eigen::MatrixXd img(1, 9);
  img << 0, 1, 2, 3, 4, 5, 6, 7, 8;
  const Tensor p = extract_patches(img, 3, 3, 2, 2);
  ASSERT_EQ(p.shape(), (Tensor::Shape{1, 4, 4}));
  const double expect[4][4] = {{0, 1, 3, 4}, {1, 2, 4, 5}, {3, 4, 6, 7}, {4, 5, 7, 8}};
  for (int q = 0; q < 4; ++q)
    for (int i = 0; i < 4; ++i) EXPECT_EQ(p(0, q, i), expect[q][i]);
  try {
    extract_patches(img, 3, 3, 4, 1);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::PatchLargerThanImage);
  }
}

TEST(Convolutional, GramMatchesBruteForcePatchSum) {
  std::mt19937_64 rng(23);
  for (auto [H, W, h, w] : {std::array<Eigen::Index, 4>{3, 3, 2, 2}, {4, 3, 2, 1}, {2, 2, 2, 2}, {3, 4, 1, 3}}) {
    const Eigen::MatrixXd X = oracle::random_matrix(rng, 4, H * W), X2 = oracle::random_matrix(rng, 3, H * W);
    Convolutional k(BaseKernel::make(Family::SquaredExponential, 0.9, 0.8), H, W, h, w);
    Eigen::MatrixXd ref(4, 3);
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 3; ++j)
        ref(i, j) = oracle::conv_point("sqexp", 0.9, Eigen::VectorXd::Constant(1, 0.8), X.row(i).transpose(),
                                       X2.row(j).transpose(), H, W, h, w);
    EXPECT_LT(oracle::max_abs_diff(k.k_full(X, X2), ref), 1e-10);
    EXPECT_LT(oracle::max_abs_diff(k.k_diag(X), k.k_full(X).diagonal()), 1e-10);
  }
}

TEST(Convolutional, MultioutputViewSumsToSingleOutput) {
  std::mt19937_64 rng(24);
  Convolutional k(BaseKernel::make(Family::Matern52, 1.1, 0.6), 3, 3, 2, 2);
  const Eigen::MatrixXd X = oracle::random_matrix(rng, 3, 9);
  const Tensor full = mo_k(k, X, true);
  ASSERT_EQ(full.shape(), (Tensor::Shape{3, 4, 3, 4}));
  const Eigen::MatrixXd K = k.k_full(X);
  for (Eigen::Index n = 0; n < 3; ++n)
    for (Eigen::Index m = 0; m < 3; ++m) {
      double s = 0.0;
      for (Eigen::Index p = 0; p < 4; ++p)
        for (Eigen::Index q = 0; q < 4; ++q) s += full(n, p, m, q);
      EXPECT_NEAR(s, K(n, m), 1e-12);
    }
}

// Oracle for K((x, p), (x', p')) = sum_l W[p, l] W[p', l] k_l(x, x').
Eigen::MatrixXd lmc_oracle(const std::vector<std::pair<const char *, double>> &latents, const Eigen::MatrixXd &W,
                           const Eigen::MatrixXd &X, const Eigen::MatrixXd &X2, double ls) {
  const Eigen::Index P = W.rows();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(X.rows() * P, X2.rows() * P);
  for (std::size_t l = 0; l < latents.size(); ++l) {
    const Eigen::MatrixXd G =
        oracle::gram(latents[l].first, latents[l].second, Eigen::VectorXd::Constant(1, ls), X, X2);
    for (Eigen::Index n = 0; n < X.rows(); ++n)
      for (Eigen::Index m = 0; m < X2.rows(); ++m)
        for (Eigen::Index p = 0; p < P; ++p)
          for (Eigen::Index q = 0; q < P; ++q)
            K(n * P + p, m * P + q) += W(p, static_cast<Eigen::Index>(l)) * W(q, static_cast<Eigen::Index>(l)) * G(n, m);
  }
  return K;
}

TEST(Multioutput, LmcFullGramMatchesOracle) {
  std::mt19937_64 rng(25);
  const Eigen::MatrixXd W = oracle::random_matrix(rng, 3, 2);
  std::vector<Cloned<SingleOutputKernel>> ks;
  ks.emplace_back(BaseKernel::make(Family::SquaredExponential, 1.2, 0.7));
  ks.emplace_back(BaseKernel::make(Family::Matern32, 0.5, 0.7));
  LinearCoregionalization k(ks, W);
  const Eigen::MatrixXd X = oracle::random_matrix(rng, 5, 1), X2 = oracle::random_matrix(rng, 4, 1);
  const Tensor full = mo_k(k, X, X2, true);
  ASSERT_EQ(full.shape(), (Tensor::Shape{5, 3, 4, 3}));
  EXPECT_LT(oracle::max_abs_diff(full.as_matrix(15, 12), lmc_oracle({{"sqexp", 1.2}, {"matern32", 0.5}}, W, X, X2, 0.7)),
            1e-13);
  const Tensor latent = mo_k(k, X, X2, false);
  ASSERT_EQ(latent.shape(), (Tensor::Shape{2, 5, 4}));
  EXPECT_LT(oracle::max_abs_diff(latent.slice(1), oracle::gram("matern32", 0.5, Eigen::VectorXd::Constant(1, 0.7), X, X2)),
            1e-13);

  const Tensor d = mo_k_diag(k, X, true), dm = mo_k_diag(k, X, false);
  const Tensor self = mo_k(k, X, true);
  for (Eigen::Index n = 0; n < 5; ++n)
    for (Eigen::Index p = 0; p < 3; ++p) {
      EXPECT_NEAR(dm(n, p), self(n, p, n, p), 1e-13);
      for (Eigen::Index q = 0; q < 3; ++q) EXPECT_NEAR(d(n, p, q), self(n, p, n, q), 1e-13);
    }
}

TEST(Multioutput, IndependentKernelsHaveBlockDiagonalGrams) {
  std::mt19937_64 rng(26);
  const Eigen::MatrixXd X = oracle::random_matrix(rng, 4, 2);
  SharedIndependent shared(BaseKernel::make(Family::Matern12, 0.8, 1.1), 3);
  std::vector<Cloned<SingleOutputKernel>> ks;
  for (double v : {0.5, 1.0}) ks.emplace_back(BaseKernel::make(Family::SquaredExponential, v, 0.9));
  SeparateIndependent separate(ks);
  const Tensor fs = mo_k(shared, X, true), ms = mo_k(shared, X, false);
  ASSERT_EQ(ms.shape(), (Tensor::Shape{3, 4, 4}));
  for (Eigen::Index n = 0; n < 4; ++n)
    for (Eigen::Index m = 0; m < 4; ++m)
      for (Eigen::Index p = 0; p < 3; ++p)
        for (Eigen::Index q = 0; q < 3; ++q) EXPECT_EQ(fs(n, p, m, q), p == q ? ms(p, n, m) : 0.0);
  const Tensor sep = mo_k(separate, X, false);
  EXPECT_LT(oracle::max_abs_diff(sep.slice(1), oracle::gram("sqexp", 1.0, Eigen::VectorXd::Constant(1, 0.9), X, X)),
            1e-14);
  EXPECT_EQ(output_count(separate), 2);
  EXPECT_THROW(as_single_output(separate), Error);
}

TEST(Multioutput, IntrinsicCoregionalizationMatchesLmcWithSharedKernel) {
  std::mt19937_64 rng(27);
  const Eigen::MatrixXd W = oracle::random_matrix(rng, 2, 3);
  IntrinsicCoregionalization imc(BaseKernel::make(Family::SquaredExponential, 1.0, 0.5), W);
  const Eigen::MatrixXd X = oracle::random_matrix(rng, 3, 1);
  const Tensor full = mo_k(imc, X, true);
  EXPECT_LT(oracle::max_abs_diff(full.as_matrix(6, 6),
                                 lmc_oracle({{"sqexp", 1.0}, {"sqexp", 1.0}, {"sqexp", 1.0}}, W, X, X, 0.5)),
            1e-13);
}

TEST(Kernel, CloneIsDeep) {
  auto k = BaseKernel::make(Family::SquaredExponential, 1.0);
  Cloned<Kernel> a(std::move(k));
  Cloned<Kernel> b = a;
  static_cast<BaseKernel &>(*b).params().variance = 5.0;
  EXPECT_EQ(static_cast<BaseKernel &>(*a).params().variance, 1.0);
}

} // namespace
} // namespace ivgp
