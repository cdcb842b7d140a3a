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

#include "ivgp/covariances.hpp"

#include <cmath>
#include <string>

#include "ivgp/compute.hpp"
#include "ivgp/errors.hpp"

namespace ivgp {
namespace {

// The generic InducingPoints entries would silently ignore the extra
// structure of a subclass, so only the exact type is accepted there.
void require_plain_points(const InducingVariable &iv, const Kernel &kernel) {
  if (iv.type_tag() != "InducingPoints")
    throw Error(ErrorCode::NoImplementation,
                "no covariance registered for (" + iv.type_tag() + ", " + kernel.type_tag() + ")");
}

const Eigen::MatrixXd &points_of(const InducingVariable &iv) {
  return static_cast<const InducingPoints &>(iv).Z();
}

void add_jitter(Eigen::MatrixXd &K, double jitter) {
  if (jitter != 0.0) K.diagonal().array() += jitter;
}

Eigen::VectorXd broadcast_lengthscales(const BaseKernel &k, Eigen::Index dims) {
  const Eigen::VectorXd &ls = k.params().lengthscales;
  if (ls.size() == 1) return Eigen::VectorXd::Constant(dims, ls(0));
  if (ls.size() != dims)
    throw Error(ErrorCode::DimensionMismatch, "lengthscale count does not match input width");
  return ls;
}

const BaseKernel &squared_exponential(const Kernel &kernel) {
  const auto &k = dynamic_cast<const BaseKernel &>(kernel);
  if (k.family() != BaseKernel::Family::SquaredExponential)
    throw Error(ErrorCode::NoImplementation, "multiscale needs a squared exponential kernel");
  return k;
}

StructuredPSD kuu_points(const InducingVariable &iv, const Kernel &kernel, double jitter) {
  require_plain_points(iv, kernel);
  Eigen::MatrixXd K = as_single_output(kernel).k_full(points_of(iv));
  add_jitter(K, jitter);
  return StructuredPSD::dense(std::move(K));
}

StructuredPSD kuu_points_mo(const InducingVariable &iv, const Kernel &kernel, double jitter) {
  require_plain_points(iv, kernel);
  const Eigen::MatrixXd &Z = points_of(iv);
  const Eigen::Index P = output_count(kernel);
  const Tensor t = mo_k(kernel, Z, true);
  Eigen::MatrixXd K = t.as_matrix(Z.rows() * P, Z.rows() * P);
  add_jitter(K, jitter);
  return StructuredPSD::dense(std::move(K));
}

StructuredPSD kuu_multiscale(const InducingVariable &iv, const Kernel &kernel, double jitter) {
  const auto &ms = static_cast<const Multiscale &>(iv);
  const BaseKernel &k = squared_exponential(kernel);
  const Eigen::MatrixXd &Z = ms.Z();
  const Eigen::MatrixXd &S = ms.scales();
  const Eigen::Index M = Z.rows();
  const Eigen::Index D = Z.cols();
  const Eigen::VectorXd ls = broadcast_lengthscales(k, D);
  Eigen::MatrixXd K(M, M);
  for (Eigen::Index a = 0; a < M; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      double log_norm = 0.0;
      double quad = 0.0;
      for (Eigen::Index d = 0; d < D; ++d) {
        const double l2 = ls(d) * ls(d);
        const double total = l2 + S(a, d) * S(a, d) + S(b, d) * S(b, d);
        const double diff = Z(a, d) - Z(b, d);
        log_norm += 0.5 * std::log(l2 / total);
        quad += diff * diff / total;
      }
      K(a, b) = K(b, a) = k.params().variance * std::exp(log_norm - 0.5 * quad);
    }
  }
  add_jitter(K, jitter);
  return StructuredPSD::dense(std::move(K));
}

StructuredPSD kuu_patches(const InducingVariable &iv, const Kernel &kernel, double jitter) {
  const auto &conv = static_cast<const Convolutional &>(kernel);
  const Eigen::MatrixXd &Z = points_of(iv);
  if (Z.cols() != conv.patch_size())
    throw Error(ErrorCode::DimensionMismatch, "inducing patch length does not match kernel");
  Eigen::MatrixXd K = conv.base().k_full(Z);
  add_jitter(K, jitter);
  return StructuredPSD::dense(std::move(K));
}

StructuredPSD kuu_latent(const InducingVariable &iv, const Kernel &kernel, double jitter) {
  const auto &mo = static_cast<const MultioutputKernel &>(kernel);
  const Eigen::Index L = mo.num_latent();
  num_inducing(iv, kernel);
  const bool shared_iv = dynamic_cast<const SharedIndependentInducingVariables *>(&iv);
  if (shared_iv && mo.shared_latent())
    return StructuredPSD::shared_blocks(kuu(latent_part(iv, 0), mo.latent(0), jitter).densify(),
                                        L);
  std::vector<Eigen::MatrixXd> blocks;
  for (Eigen::Index l = 0; l < L; ++l)
    blocks.push_back(kuu(latent_part(iv, l), mo.latent(l), jitter).densify());
  return StructuredPSD::block_diagonal(std::move(blocks));
}

KufResult kuf_points(const InducingVariable &iv, const Kernel &kernel,
                     const Eigen::Ref<const Eigen::MatrixXd> &X) {
  require_plain_points(iv, kernel);
  return KufResult(as_single_output(kernel).k_full(points_of(iv), X));
}

KufResult kuf_points_mo(const InducingVariable &iv, const Kernel &kernel,
                        const Eigen::Ref<const Eigen::MatrixXd> &X) {
  require_plain_points(iv, kernel);
  return KufResult(mo_k(kernel, points_of(iv), X, true));
}

KufResult kuf_multiscale(const InducingVariable &iv, const Kernel &kernel,
                         const Eigen::Ref<const Eigen::MatrixXd> &X) {
  const auto &ms = static_cast<const Multiscale &>(iv);
  const BaseKernel &k = squared_exponential(kernel);
  const Eigen::MatrixXd &Z = ms.Z();
  const Eigen::MatrixXd &S = ms.scales();
  if (X.cols() != Z.cols())
    throw Error(ErrorCode::DimensionMismatch, "inputs and inducing inputs differ in width");
  const Eigen::Index D = Z.cols();
  const Eigen::VectorXd ls = broadcast_lengthscales(k, D);
  Eigen::MatrixXd K(Z.rows(), X.rows());
  for (Eigen::Index m = 0; m < Z.rows(); ++m) {
    Eigen::VectorXd inv_total(D);
    double log_norm = 0.0;
    for (Eigen::Index d = 0; d < D; ++d) {
      const double l2 = ls(d) * ls(d);
      const double total = l2 + S(m, d) * S(m, d);
      inv_total(d) = 1.0 / total;
      log_norm += 0.5 * std::log(l2 / total);
    }
    for (Eigen::Index n = 0; n < X.rows(); ++n) {
      const double quad =
          ((X.row(n) - Z.row(m)).transpose().array().square() * inv_total.array()).sum();
      K(m, n) = k.params().variance * std::exp(log_norm - 0.5 * quad);
    }
  }
  return KufResult(std::move(K));
}

KufResult kuf_patches(const InducingVariable &iv, const Kernel &kernel,
                      const Eigen::Ref<const Eigen::MatrixXd> &X) {
  const auto &conv = static_cast<const Convolutional &>(kernel);
  const Eigen::MatrixXd &Z = points_of(iv);
  if (Z.cols() != conv.patch_size())
    throw Error(ErrorCode::DimensionMismatch, "inducing patch length does not match kernel");
  const Eigen::MatrixXd g = conv.base().k_full(Z, conv.patches(X));
  return KufResult(compute::block_sum(g, 1, conv.num_patches()));
}

KufResult kuf_latent(const InducingVariable &iv, const Kernel &kernel,
                     const Eigen::Ref<const Eigen::MatrixXd> &X) {
  const auto &mo = static_cast<const MultioutputKernel &>(kernel);
  num_inducing(iv, kernel);
  std::vector<Eigen::MatrixXd> blocks;
  for (Eigen::Index l = 0; l < mo.num_latent(); ++l) {
    KufResult part = kuf(latent_part(iv, l), mo.latent(l), X);
    auto *m = std::get_if<Eigen::MatrixXd>(&part);
    if (!m)
      throw Error(ErrorCode::UnsupportedCombination,
                  "latent inducing parts must give single-output covariances");
    blocks.push_back(std::move(*m));
  }
  return KufResult(std::move(blocks));
}

} // namespace

DispatchRegistry<KuuFn> &kuu_registry() {
  static DispatchRegistry<KuuFn> registry = [] {
    DispatchRegistry<KuuFn> r("Kuu", inducing_types(), kernel_types());
    r.add("InducingPoints", "Kernel", kuu_points);
    r.add("InducingPoints", "MultioutputKernel", kuu_points_mo);
    r.add("Multiscale", "SquaredExponential", kuu_multiscale);
    r.add("InducingPatches", "Convolutional", kuu_patches);
    r.add("SharedIndependentInducingVariables", "MultioutputKernel", kuu_latent);
    r.add("SeparateIndependentInducingVariables", "MultioutputKernel", kuu_latent);
    return r;
  }();
  return registry;
}

DispatchRegistry<KufFn> &kuf_registry() {
  static DispatchRegistry<KufFn> registry = [] {
    DispatchRegistry<KufFn> r("Kuf", inducing_types(), kernel_types());
    r.add("InducingPoints", "Kernel", kuf_points);
    r.add("InducingPoints", "MultioutputKernel", kuf_points_mo);
    r.add("Multiscale", "SquaredExponential", kuf_multiscale);
    r.add("InducingPatches", "Convolutional", kuf_patches);
    r.add("SharedIndependentInducingVariables", "MultioutputKernel", kuf_latent);
    r.add("SeparateIndependentInducingVariables", "MultioutputKernel", kuf_latent);
    return r;
  }();
  return registry;
}

StructuredPSD kuu(const InducingVariable &iv, const Kernel &kernel, double jitter) {
  return kuu_registry().resolve(iv.type_tag(), kernel.type_tag())(iv, kernel, jitter);
}

KufResult kuf(const InducingVariable &iv, const Kernel &kernel,
              const Eigen::Ref<const Eigen::MatrixXd> &X) {
  return kuf_registry().resolve(iv.type_tag(), kernel.type_tag())(iv, kernel, X);
}

} // namespace ivgp
