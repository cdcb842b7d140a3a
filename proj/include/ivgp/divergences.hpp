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

#ifndef IVGP_DIVERGENCES_HPP_
#define IVGP_DIVERGENCES_HPP_

#include <functional>

#include "ivgp/conditionals.hpp"
#include "ivgp/dispatch.hpp"
#include "ivgp/numerics.hpp"

namespace ivgp {

// KL(q || p) for q = N(q_mu, S) and p = N(0, Kuu), or p = N(0, I) when Kuu is
// null (whitened parameterization). Block-diagonal Kuu together with a block
// q_sqrt is evaluated as a sum of per-block divergences.
double gauss_kl(const VariationalGaussian &q, const StructuredPSD *Kuu);

using PriorKlFn = std::function<double(const InducingVariable &, const Kernel &,
                                       const VariationalGaussian &, double jitter)>;

DispatchRegistry<PriorKlFn> &prior_kl_registry();

// KL between q(u) and the prior p(u) implied by (iv, kernel). Whitened q
// never evaluates Kuu.
double prior_kl(const InducingVariable &iv, const Kernel &kernel, const VariationalGaussian &q,
                double jitter = kDefaultKuuJitter);

} // namespace ivgp

#endif // IVGP_DIVERGENCES_HPP_
