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

#ifndef IVGP_COVARIANCES_HPP_
#define IVGP_COVARIANCES_HPP_

#include <Eigen/Core>

#include <functional>
#include <variant>
#include <vector>

#include "ivgp/dispatch.hpp"
#include "ivgp/inducing.hpp"
#include "ivgp/kernels.hpp"
#include "ivgp/numerics.hpp"
#include "ivgp/tensor.hpp"

namespace ivgp {

/*
 * Cross-covariance between inducing variables and function values at X:
 *   Eigen::MatrixXd               M x N, single-output
 *   Tensor                        M x P x N x P, inducing points under a
 *                                 P-output kernel (row m * P + p of the
 *                                 flattened (M*P) x (N*P) view)
 *   std::vector<Eigen::MatrixXd>  L blocks of M_l x N, latent-stacked
 *                                 inducing variables, mixing not applied
 */
using KufResult = std::variant<Eigen::MatrixXd, Tensor, std::vector<Eigen::MatrixXd>>;

using KuuFn =
    std::function<StructuredPSD(const InducingVariable &, const Kernel &, double jitter)>;
using KufFn = std::function<KufResult(const InducingVariable &, const Kernel &,
                                      const Eigen::Ref<const Eigen::MatrixXd> &X)>;

// Process-wide registries, pre-populated with the built-in pairs. Third-party
// inducing variables or kernels are supported by adding their type tags to
// inducing_types() / kernel_types() and registering an implementation here
// before any concurrent use.
DispatchRegistry<KuuFn> &kuu_registry();
DispatchRegistry<KufFn> &kuf_registry();

// Prior covariance of the inducing variables plus jitter * I.
StructuredPSD kuu(const InducingVariable &iv, const Kernel &kernel, double jitter = 0.0);
KufResult kuf(const InducingVariable &iv, const Kernel &kernel,
              const Eigen::Ref<const Eigen::MatrixXd> &X);

} // namespace ivgp

#endif // IVGP_COVARIANCES_HPP_
