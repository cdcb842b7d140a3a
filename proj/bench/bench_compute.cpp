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

// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <Eigen/Core>

#include <cstdlib>

#include "ivgp/compute.hpp"

namespace {

using ivgp::compute::Stationary;

Eigen::MatrixXd inputs(Eigen::Index n, Eigen::Index d, unsigned seed) {
  std::srand(seed);
  return Eigen::MatrixXd::Random(n, d);
}

Eigen::MatrixXd spd(Eigen::Index n) {
  const Eigen::MatrixXd A = inputs(n, n, 3);
  return A * A.transpose() + static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n);
}

template <bool Parallel> void BM_StationaryGram(benchmark::State &state) {
  const Eigen::Index n = state.range(0);
  const Eigen::MatrixXd X = inputs(n, 4, 1), X2 = inputs(n, 4, 2);
  const Eigen::VectorXd ls = Eigen::VectorXd::Constant(4, 0.7);
  for (auto _ : state) {
    Eigen::MatrixXd K = Parallel ? ivgp::compute::stationary_gram(Stationary::Matern52, 1.3, ls, X, X2)
                                 : ivgp::compute::serial::stationary_gram(Stationary::Matern52, 1.3, ls, X, X2);
    benchmark::DoNotOptimize(K.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}

template <bool Parallel> void BM_Cholesky(benchmark::State &state) {
  const Eigen::MatrixXd A = spd(state.range(0));
  for (auto _ : state) {
    Eigen::MatrixXd L = A;
    const bool ok = Parallel ? ivgp::compute::cholesky_lower(L) : ivgp::compute::serial::cholesky_lower(L);
    benchmark::DoNotOptimize(ok);
  }
}

template <bool Parallel> void BM_LowerSolve(benchmark::State &state) {
  const Eigen::Index n = state.range(0);
  Eigen::MatrixXd L = spd(n);
  ivgp::compute::serial::cholesky_lower(L);
  const Eigen::MatrixXd B = inputs(n, n, 4);
  for (auto _ : state) {
    Eigen::MatrixXd X = Parallel ? ivgp::compute::lower_solve(L, B, false)
                                 : ivgp::compute::serial::lower_solve(L, B, false);
    benchmark::DoNotOptimize(X.data());
  }
}

template <bool Parallel> void BM_BlockSum(benchmark::State &state) {
  const Eigen::Index n = state.range(0), p = 9;
  const Eigen::MatrixXd M = inputs(n * p, n * p, 5);
  for (auto _ : state) {
    Eigen::MatrixXd S = Parallel ? ivgp::compute::block_sum(M, p, p) : ivgp::compute::serial::block_sum(M, p, p);
    benchmark::DoNotOptimize(S.data());
  }
}

BENCHMARK_TEMPLATE(BM_StationaryGram, false)->Arg(128)->Arg(512)->Arg(1024);
BENCHMARK_TEMPLATE(BM_StationaryGram, true)->Arg(128)->Arg(512)->Arg(1024);
BENCHMARK_TEMPLATE(BM_Cholesky, false)->Arg(128)->Arg(512);
BENCHMARK_TEMPLATE(BM_Cholesky, true)->Arg(128)->Arg(512);
BENCHMARK_TEMPLATE(BM_LowerSolve, false)->Arg(128)->Arg(512);
BENCHMARK_TEMPLATE(BM_LowerSolve, true)->Arg(128)->Arg(512);
BENCHMARK_TEMPLATE(BM_BlockSum, false)->Arg(32)->Arg(96);
BENCHMARK_TEMPLATE(BM_BlockSum, true)->Arg(32)->Arg(96);

} // namespace

BENCHMARK_MAIN();
