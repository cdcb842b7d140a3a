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

#include "ivgp/conditionals.hpp"

#include <string>

#include "ivgp/errors.hpp"
#include "ivgp/probe.hpp"

namespace ivgp {

Eigen::MatrixXd VariationalGaussian::dense_sqrt() const {
  if (const auto *L = std::get_if<LowerTriangular>(&q_sqrt)) return L->dense();
  const auto &blocks = std::get<std::vector<LowerTriangular>>(q_sqrt);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(size(), size());
  Eigen::Index offset = 0;
  for (const auto &b : blocks) {
    out.block(offset, offset, b.dim(), b.dim()) = b.dense();
    offset += b.dim();
  }
  return out;
}

const LowerTriangular &VariationalGaussian::block(Eigen::Index l) const {
  if (const auto *L = std::get_if<LowerTriangular>(&q_sqrt)) {
    if (l != 0) throw Error(ErrorCode::ShapeMismatch, "dense q_sqrt has a single block");
    return *L;
  }
  return std::get<std::vector<LowerTriangular>>(q_sqrt).at(static_cast<std::size_t>(l));
}

Eigen::Index VariationalGaussian::num_blocks() const {
  if (const auto *b = std::get_if<std::vector<LowerTriangular>>(&q_sqrt))
    return static_cast<Eigen::Index>(b->size());
  return 1;
}

VariationalGaussian VariationalGaussian::standard(Eigen::Index size, bool whiten,
                                                  Eigen::Index blocks) {
  VariationalGaussian q;
  q.q_mu = Eigen::VectorXd::Zero(size);
  q.whiten = whiten;
  if (blocks <= 0) {
    q.q_sqrt = LowerTriangular::identity(size);
    return q;
  }
  if (size % blocks != 0)
    throw Error(ErrorCode::ShapeMismatch, "size is not a multiple of the block count");
  q.q_sqrt = std::vector<LowerTriangular>(static_cast<std::size_t>(blocks),
                                          LowerTriangular::identity(size / blocks));
  return q;
}

Tensor::Shape covariance_shape(Eigen::Index N, Eigen::Index P, bool full_cov,
                               bool full_output_cov) {
  if (full_cov && full_output_cov) return {N, P, N, P};
  if (full_cov) return {P, N, N};
  if (full_output_cov) return {N, P, P};
  return {N, P};
}

Eigen::MatrixXd PosteriorMoments::marginal_variance() const {
  const Eigen::Index N = num_points();
  const Eigen::Index P = num_outputs();
  Eigen::MatrixXd v(N, P);
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index p = 0; p < P; ++p) {
      if (full_cov && full_output_cov)
        v(n, p) = cov(n, p, n, p);
      else if (full_cov)
        v(n, p) = cov(p, n, n);
      else if (full_output_cov)
        v(n, p) = cov(n, p, p);
      else
        v(n, p) = cov(n, p);
    }
  return v;
}

namespace {

// Kmn^T Kmm^-1 Kmn = left^T right (right empty: left^T left); the predictive
// mean is B^T m and the q-dependent covariance term is (L_S^T B)^T (L_S^T B).
struct Projection {
  Eigen::MatrixXd left;
  Eigen::MatrixXd right;
  Eigen::MatrixXd B;
};

Projection project(const StructuredPSD &Kmm, const Eigen::MatrixXd &Kmn, bool whiten) {
  if (Kmm.dim() != Kmn.rows())
    throw Error(ErrorCode::ShapeMismatch,
                "Kmm is " + std::to_string(Kmm.dim()) + " wide but Kmn has " +
                    std::to_string(Kmn.rows()) + " rows");
  if (!whiten && std::holds_alternative<StructuredPSD::DiagPlusLowRank>(Kmm.variant())) {
    Eigen::MatrixXd B = structured_solve(Kmm, Kmn);
    AllocationProbe::note("Kmm^-1 Kmn", B);
    return {Kmn, B, B};
  }
  const LowerTriangular L =
      cholesky(Kmm.is_dense() ? std::get<StructuredPSD::Dense>(Kmm.variant()).matrix
                              : Kmm.densify());
  Eigen::MatrixXd A = tri_solve(L, Kmn);
  AllocationProbe::note("A", A);
  if (whiten) return {A, {}, A};
  Eigen::MatrixXd B = tri_solve(L, A, true);
  AllocationProbe::note("B", B);
  return {std::move(A), {}, std::move(B)};
}

Eigen::MatrixXd reduction_full(const Projection &p) {
  if (p.right.size() == 0) return p.left.transpose() * p.left;
  const Eigen::MatrixXd r = p.left.transpose() * p.right;
  return 0.5 * (r + r.transpose());
}

Eigen::VectorXd reduction_diag(const Projection &p) {
  if (p.right.size() == 0) return p.left.colwise().squaredNorm().transpose();
  return p.left.cwiseProduct(p.right).colwise().sum().transpose();
}

struct Raw {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov; // N x N, or N x 1 variances
};

Raw finish(const Projection &p, const Eigen::Ref<const Eigen::MatrixXd> &Knn,
           const Eigen::Ref<const Eigen::VectorXd> &m, const Eigen::MatrixXd &Ls, bool full_cov) {
  if (m.size() != p.B.rows())
    throw Error(ErrorCode::ShapeMismatch,
                "q_mu has " + std::to_string(m.size()) + " entries, expected " +
                    std::to_string(p.B.rows()));
  Raw r;
  r.mean = p.B.transpose() * m;
  const Eigen::MatrixXd LB = Ls.triangularView<Eigen::Lower>().transpose() * p.B;
  AllocationProbe::note("L_S^T B", LB);
  const Eigen::Index N = p.B.cols();
  if (full_cov) {
    if (Knn.rows() != N || Knn.cols() != N)
      throw Error(ErrorCode::ShapeMismatch, "Knn must be N x N for full_cov");
    r.cov = Knn - reduction_full(p) + LB.transpose() * LB;
    r.cov = 0.5 * (r.cov + r.cov.transpose()).eval();
  } else {
    Eigen::VectorXd knn;
    if (Knn.cols() == 1 && Knn.rows() == N)
      knn = Knn.col(0);
    else if (Knn.rows() == N && Knn.cols() == N)
      knn = Knn.diagonal();
    else
      throw Error(ErrorCode::ShapeMismatch, "Knn must be N x 1 or N x N");
    r.cov = knn - reduction_diag(p) + LB.colwise().squaredNorm().transpose();
  }
  AllocationProbe::note("cov", r.cov);
  return r;
}

PosteriorMoments wrap_single(Raw r, bool full_cov, bool full_output_cov) {
  const Eigen::Index N = r.mean.size();
  PosteriorMoments pm;
  pm.mean = r.mean;
  pm.full_cov = full_cov;
  pm.full_output_cov = full_output_cov;
  pm.cov = Tensor(covariance_shape(N, 1, full_cov, full_output_cov));
  std::copy(r.cov.data(), r.cov.data() + r.cov.size(), pm.cov.data());
  return pm;
}

void require_size(const VariationalGaussian &q, Eigen::Index expected) {
  if (q.size() != expected)
    throw Error(ErrorCode::ShapeMismatch,
                "q has " + std::to_string(q.size()) + " inducing values, expected " +
                    std::to_string(expected));
}

Eigen::MatrixXd single_block_sqrt(const VariationalGaussian &q) {
  if (q.num_blocks() != 1)
    throw Error(ErrorCode::ShapeMismatch, "block q_sqrt needs latent inducing variables");
  return q.block(0).dense();
}

Eigen::MatrixXd diag_column(const Eigen::VectorXd &d) { return d; }

PosteriorMoments single_output_path(const Eigen::Ref<const Eigen::MatrixXd> &X,
                                    const InducingVariable &iv, const Kernel &kernel,
                                    const VariationalGaussian &q,
                                    const ConditionalOptions &opt) {
  const SingleOutputKernel &k = as_single_output(kernel);
  require_size(q, num_inducing(iv, kernel));
  const StructuredPSD Kmm = kuu(iv, kernel, opt.jitter);
  AllocationProbe::note("Kmm", Kmm.dim(), Kmm.dim());
  KufResult kr = kuf(iv, kernel, X);
  auto *Kmn = std::get_if<Eigen::MatrixXd>(&kr);
  if (!Kmn)
    throw Error(ErrorCode::UnsupportedCombination, "single-output path needs an M x N Kuf");
  AllocationProbe::note("Kmn", *Kmn);
  const Eigen::MatrixXd Knn = opt.full_cov ? k.k_full(X) : diag_column(k.k_diag(X));
  Raw r = finish(project(Kmm, *Kmn, q.whiten), Knn, q.q_mu, single_block_sqrt(q), opt.full_cov);
  return wrap_single(std::move(r), opt.full_cov, opt.full_output_cov);
}

// Per-output N x N prior Grams of a multioutput kernel.
Tensor output_marginal_gram(const Kernel &kernel, const Eigen::Ref<const Eigen::MatrixXd> &X) {
  const auto *mo = dynamic_cast<const MultioutputKernel *>(&kernel);
  if (!mo || !mo->outputs_correlated()) return mo_k(kernel, X, false);
  const Eigen::Index N = X.rows();
  const Eigen::Index P = mo->num_outputs();
  const Eigen::MatrixXd W = mo->mixing();
  Tensor out({P, N, N});
  Eigen::MatrixXd shared;
  for (Eigen::Index l = 0; l < mo->num_latent(); ++l) {
    if (l == 0 || !mo->shared_latent()) shared = mo->latent(l).k_full(X);
    for (Eigen::Index p = 0; p < P; ++p) out.slice(p) += W(p, l) * W(p, l) * shared;
  }
  return out;
}

PosteriorMoments fully_correlated_path(const Eigen::Ref<const Eigen::MatrixXd> &X,
                                       const InducingVariable &iv, const Kernel &kernel,
                                       const VariationalGaussian &q,
                                       const ConditionalOptions &opt) {
  const Eigen::Index P = output_count(kernel);
  const Eigen::Index N = X.rows();
  const Eigen::Index Mt = num_inducing(iv, kernel);
  require_size(q, Mt);
  const StructuredPSD Kmm = kuu(iv, kernel, opt.jitter);
  AllocationProbe::note("Kmm", Kmm.dim(), Kmm.dim());
  KufResult kr = kuf(iv, kernel, X);
  const auto *kt = std::get_if<Tensor>(&kr);
  if (!kt)
    throw Error(ErrorCode::UnsupportedCombination, "fully correlated path needs an M x P x N x P Kuf");
  const Eigen::MatrixXd Kmn = kt->as_matrix(Mt, N * P);
  AllocationProbe::note("Kmn", Kmn);

  if (opt.full_cov != opt.full_output_cov) {
    const Tensor Knn =
        opt.full_cov ? output_marginal_gram(kernel, X) : mo_k_diag(kernel, X, true);
    return fully_correlated_conditional(Kmn, P, Kmm, Knn, q, opt.full_cov, opt.full_output_cov);
  }
  Eigen::MatrixXd Knn;
  if (opt.full_cov) {
    Knn = mo_k(kernel, X, true).as_matrix(N * P, N * P);
  } else {
    const Tensor d = mo_k_diag(kernel, X, false);
    Knn = Eigen::Map<const Eigen::VectorXd>(d.data(), N * P);
  }
  AllocationProbe::note("Knn", Knn);
  Raw r = finish(project(Kmm, Kmn, q.whiten), Knn, q.q_mu, single_block_sqrt(q), opt.full_cov);
  PosteriorMoments pm;
  pm.full_cov = opt.full_cov;
  pm.full_output_cov = opt.full_output_cov;
  pm.mean = Eigen::Map<const RowMatrix>(r.mean.data(), N, P);
  pm.cov = Tensor(covariance_shape(N, P, opt.full_cov, opt.full_output_cov));
  std::copy(r.cov.data(), r.cov.data() + r.cov.size(), pm.cov.data());
  return pm;
}

struct LatentMoments {
  Eigen::MatrixXd mean;             // N x L
  std::vector<Eigen::MatrixXd> cov; // L entries, N x N or N x 1
};

LatentMoments latent_moments(const Eigen::Ref<const Eigen::MatrixXd> &X,
                             const InducingVariable &iv, const MultioutputKernel &mo,
                             const VariationalGaussian &q, const ConditionalOptions &opt) {
  const Eigen::Index L = mo.num_latent();
  require_size(q, num_inducing(iv, mo));
  if (q.num_blocks() != L)
    throw Error(ErrorCode::ShapeMismatch,
                "latent path needs " + std::to_string(L) + " q_sqrt blocks, got " +
                    std::to_string(q.num_blocks()));
  const StructuredPSD Kmm = kuu(iv, mo, opt.jitter);
  KufResult kr = kuf(iv, mo, X);
  auto &Kmn = std::get<std::vector<Eigen::MatrixXd>>(kr);
  const bool reuse =
      dynamic_cast<const SharedIndependentInducingVariables *>(&iv) && mo.shared_latent();

  LatentMoments out;
  out.mean.resize(X.rows(), L);
  Projection shared_projection;
  Eigen::MatrixXd shared_knn;
  Eigen::Index offset = 0;
  for (Eigen::Index l = 0; l < L; ++l) {
    const Eigen::MatrixXd &block = Kmm.block(l);
    const Eigen::Index M = block.rows();
    if (q.block(l).dim() != M)
      throw Error(ErrorCode::ShapeMismatch, "q_sqrt block does not match inducing count");
    if (!(reuse && l > 0)) {
      AllocationProbe::note("Kmm block", block);
      AllocationProbe::note("Kmn block", Kmn[static_cast<std::size_t>(l)]);
      shared_projection =
          project(StructuredPSD::dense(block), Kmn[static_cast<std::size_t>(l)], q.whiten);
      const auto &k = mo.latent(l);
      shared_knn = opt.full_cov ? k.k_full(X) : diag_column(k.k_diag(X));
      AllocationProbe::note("Knn", shared_knn);
    }
    Raw r = finish(shared_projection, shared_knn, q.q_mu.segment(offset, M), q.block(l).dense(),
                   opt.full_cov);
    out.mean.col(l) = r.mean;
    out.cov.push_back(std::move(r.cov));
    offset += M;
  }
  return out;
}

PosteriorMoments independent_path(const Eigen::Ref<const Eigen::MatrixXd> &X,
                                  const InducingVariable &iv, const Kernel &kernel,
                                  const VariationalGaussian &q, const ConditionalOptions &opt) {
  const auto &mo = dynamic_cast<const MultioutputKernel &>(kernel);
  const LatentMoments lm = latent_moments(X, iv, mo, q, opt);
  const Eigen::Index N = X.rows();
  const Eigen::Index P = mo.num_outputs();
  PosteriorMoments pm;
  pm.mean = lm.mean;
  pm.full_cov = opt.full_cov;
  pm.full_output_cov = opt.full_output_cov;
  pm.cov = Tensor(covariance_shape(N, P, opt.full_cov, opt.full_output_cov));
  for (Eigen::Index p = 0; p < P; ++p) {
    const Eigen::MatrixXd &c = lm.cov[static_cast<std::size_t>(p)];
    for (Eigen::Index n = 0; n < N; ++n) {
      if (opt.full_cov && opt.full_output_cov) {
        for (Eigen::Index m = 0; m < N; ++m) pm.cov(n, p, m, p) = c(n, m);
      } else if (opt.full_cov) {
        for (Eigen::Index m = 0; m < N; ++m) pm.cov(p, n, m) = c(n, m);
      } else if (opt.full_output_cov) {
        pm.cov(n, p, p) = c(n, 0);
      } else {
        pm.cov(n, p) = c(n, 0);
      }
    }
  }
  return pm;
}

PosteriorMoments coregionalization_path(const Eigen::Ref<const Eigen::MatrixXd> &X,
                                        const InducingVariable &iv, const Kernel &kernel,
                                        const VariationalGaussian &q,
                                        const ConditionalOptions &opt) {
  const auto &mo = dynamic_cast<const MultioutputKernel &>(kernel);
  const LatentMoments lm = latent_moments(X, iv, mo, q, opt);
  const Eigen::Index N = X.rows();
  const Eigen::Index P = mo.num_outputs();
  const Eigen::Index L = mo.num_latent();
  const Eigen::MatrixXd W = mo.mixing();
  PosteriorMoments pm;
  pm.mean = lm.mean * W.transpose();
  pm.full_cov = opt.full_cov;
  pm.full_output_cov = opt.full_output_cov;
  pm.cov = Tensor(covariance_shape(N, P, opt.full_cov, opt.full_output_cov));
  if (!opt.full_cov) {
    Eigen::MatrixXd V(N, L);
    for (Eigen::Index l = 0; l < L; ++l) V.col(l) = lm.cov[static_cast<std::size_t>(l)].col(0);
    if (opt.full_output_cov) {
      for (Eigen::Index n = 0; n < N; ++n) {
        Eigen::Map<RowMatrix> slab(pm.cov.data() + n * P * P, P, P);
        slab = W * V.row(n).asDiagonal() * W.transpose();
      }
    } else {
      pm.cov.as_matrix(N, P) = V * W.cwiseAbs2().transpose();
    }
    return pm;
  }
  if (!opt.full_output_cov) {
    for (Eigen::Index p = 0; p < P; ++p)
      for (Eigen::Index l = 0; l < L; ++l)
        pm.cov.slice(p) += W(p, l) * W(p, l) * lm.cov[static_cast<std::size_t>(l)];
    return pm;
  }
  auto flat = pm.cov.as_matrix(N * P, N * P);
  for (Eigen::Index l = 0; l < L; ++l) {
    const RowMatrix ww = W.col(l) * W.col(l).transpose();
    const Eigen::MatrixXd &c = lm.cov[static_cast<std::size_t>(l)];
    for (Eigen::Index n = 0; n < N; ++n)
      for (Eigen::Index m = 0; m < N; ++m) flat.block(n * P, m * P, P, P) += c(n, m) * ww;
  }
  return pm;
}

} // namespace

PosteriorMoments base_conditional(const Eigen::Ref<const Eigen::MatrixXd> &Kmn,
                                  const StructuredPSD &Kmm,
                                  const Eigen::Ref<const Eigen::MatrixXd> &Knn,
                                  const VariationalGaussian &q, bool full_cov) {
  Raw r = finish(project(Kmm, Kmn, q.whiten), Knn, q.q_mu, single_block_sqrt(q), full_cov);
  return wrap_single(std::move(r), full_cov, false);
}

PosteriorMoments fully_correlated_conditional(const Eigen::Ref<const Eigen::MatrixXd> &Kmn,
                                              Eigen::Index P, const StructuredPSD &Kmm,
                                              const Tensor &Knn, const VariationalGaussian &q,
                                              bool full_cov, bool full_output_cov) {
  if (P < 1 || Kmn.cols() % P != 0)
    throw Error(ErrorCode::ShapeMismatch, "Kmn columns are not a multiple of the output count");
  const Eigen::Index N = Kmn.cols() / P;
  const Tensor::Shape expected =
      full_cov ? Tensor::Shape{P, N, N} : Tensor::Shape{N, P, P};
  if (full_cov == full_output_cov || Knn.shape() != expected)
    throw Error(ErrorCode::ShapeMismatch,
                "fully correlated conditional needs differing flags and a matching Knn");
  const Projection pr = project(Kmm, Kmn, q.whiten);
  const Eigen::MatrixXd Ls = single_block_sqrt(q);
  if (q.q_mu.size() != pr.B.rows())
    throw Error(ErrorCode::ShapeMismatch, "q_mu does not match Kmm");
  PosteriorMoments pm;
  pm.full_cov = full_cov;
  pm.full_output_cov = full_output_cov;
  const Eigen::VectorXd mean = pr.B.transpose() * q.q_mu;
  pm.mean = Eigen::Map<const RowMatrix>(mean.data(), N, P);
  const Eigen::MatrixXd LB = Ls.triangularView<Eigen::Lower>().transpose() * pr.B;
  AllocationProbe::note("L_S^T B", LB);
  pm.cov = Knn;

  if (N * P <= kDenseMixedCutoff) {
    const Eigen::MatrixXd full = LB.transpose() * LB - reduction_full(pr);
    AllocationProbe::note("dense correction", full);
    for (Eigen::Index n = 0; n < N; ++n)
      for (Eigen::Index p = 0; p < P; ++p) {
        if (full_cov) {
          for (Eigen::Index m = 0; m < N; ++m) pm.cov(p, n, m) += full(n * P + p, m * P + p);
        } else {
          for (Eigen::Index r = 0; r < P; ++r) pm.cov(n, p, r) += full(n * P + p, n * P + r);
        }
      }
    return pm;
  }

  auto correction = [&](const std::vector<Eigen::Index> &cols) {
    const Eigen::MatrixXd left = pr.left(Eigen::all, cols);
    const Eigen::MatrixXd lb = LB(Eigen::all, cols);
    Eigen::MatrixXd red = pr.right.size() == 0
                              ? Eigen::MatrixXd(left.transpose() * left)
                              : Eigen::MatrixXd(left.transpose() * pr.right(Eigen::all, cols));
    red = 0.5 * (red + red.transpose()).eval();
    return Eigen::MatrixXd(lb.transpose() * lb - red);
  };
  if (full_cov) {
    for (Eigen::Index p = 0; p < P; ++p) {
      std::vector<Eigen::Index> cols(static_cast<std::size_t>(N));
      for (Eigen::Index n = 0; n < N; ++n) cols[static_cast<std::size_t>(n)] = n * P + p;
      pm.cov.slice(p) += correction(cols);
    }
  } else {
    for (Eigen::Index n = 0; n < N; ++n) {
      std::vector<Eigen::Index> cols(static_cast<std::size_t>(P));
      for (Eigen::Index p = 0; p < P; ++p) cols[static_cast<std::size_t>(p)] = n * P + p;
      Eigen::Map<RowMatrix> slab(pm.cov.data() + n * P * P, P, P);
      slab += correction(cols);
    }
  }
  return pm;
}

DispatchRegistry<ConditionalFn> &conditional_registry() {
  static DispatchRegistry<ConditionalFn> registry = [] {
    DispatchRegistry<ConditionalFn> r("conditional", inducing_types(), kernel_types());
    r.add("InducingVariable", "Kernel", single_output_path);
    r.add("InducingPoints", "MultioutputKernel", fully_correlated_path);
    for (const char *iv :
         {"SharedIndependentInducingVariables", "SeparateIndependentInducingVariables"}) {
      r.add(iv, "SharedIndependent", independent_path);
      r.add(iv, "SeparateIndependent", independent_path);
      r.add(iv, "LinearCoregionalization", coregionalization_path);
    }
    return r;
  }();
  return registry;
}

PosteriorMoments conditional(const Eigen::Ref<const Eigen::MatrixXd> &X,
                             const InducingVariable &iv, const Kernel &kernel,
                             const VariationalGaussian &q, const ConditionalOptions &options) {
  return conditional_registry().resolve(iv.type_tag(), kernel.type_tag())(X, iv, kernel, q,
                                                                          options);
}

PosteriorMoments conditional(const Eigen::Ref<const Eigen::MatrixXd> &X,
                             const InducingVariable &iv, const Kernel &kernel,
                             const VariationalGaussian &q, bool full_cov, bool full_output_cov,
                             double jitter) {
  return conditional(X, iv, kernel, q, ConditionalOptions{full_cov, full_output_cov, jitter});
}

bool needs_output_covariance(const InducingVariable &iv, const Kernel &kernel) {
  if (output_count(kernel) == 1) return false;
  if (!is_latent_inducing(iv)) return true;
  const auto *mo = dynamic_cast<const MultioutputKernel *>(&kernel);
  return mo && mo->outputs_correlated();
}

namespace {

Tensor default_sample(const Eigen::Ref<const Eigen::MatrixXd> &X, const InducingVariable &iv,
                      const Kernel &kernel, const VariationalGaussian &q, RngState &rng,
                      Eigen::Index S, double jitter) {
  const bool full_output = needs_output_covariance(iv, kernel);
  const PosteriorMoments pm = conditional(X, iv, kernel, q, false, full_output, jitter);
  const Eigen::Index N = pm.num_points();
  const Eigen::Index P = pm.num_outputs();
  const Eigen::MatrixXd eps = standard_normal(rng, P, S * N);
  Tensor out({S, N, P});
  for (Eigen::Index n = 0; n < N; ++n) {
    Eigen::MatrixXd factor = Eigen::MatrixXd::Zero(P, P);
    if (full_output) {
      const Eigen::Map<const RowMatrix> slab(pm.cov.data() + n * P * P, P, P);
      const Eigen::MatrixXd sym = 0.5 * (slab + slab.transpose());
      if (sym.diagonal().maxCoeff() > 0.0) factor = cholesky(sym).dense();
    } else {
      for (Eigen::Index p = 0; p < P; ++p) factor(p, p) = std::sqrt(std::max(pm.cov(n, p), 0.0));
    }
    for (Eigen::Index s = 0; s < S; ++s) {
      const Eigen::VectorXd draw = pm.mean.row(n).transpose() + factor * eps.col(s * N + n);
      for (Eigen::Index p = 0; p < P; ++p) out(s, n, p) = draw(p);
    }
  }
  return out;
}

} // namespace

DispatchRegistry<SampleFn> &sample_conditional_registry() {
  static DispatchRegistry<SampleFn> registry = [] {
    DispatchRegistry<SampleFn> r("sample_conditional", inducing_types(), kernel_types());
    r.add("InducingVariable", "Kernel", default_sample);
    return r;
  }();
  return registry;
}

Tensor sample_conditional(const Eigen::Ref<const Eigen::MatrixXd> &X, const InducingVariable &iv,
                          const Kernel &kernel, const VariationalGaussian &q, RngState &rng,
                          Eigen::Index num_samples, double jitter) {
  return sample_conditional_registry().resolve(iv.type_tag(), kernel.type_tag())(
      X, iv, kernel, q, rng, num_samples, jitter);
}

} // namespace ivgp
