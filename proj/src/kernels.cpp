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

#include "ivgp/kernels.hpp"

#include <map>
#include <string>

#include "ivgp/compute.hpp"
#include "ivgp/errors.hpp"

namespace ivgp {
namespace {

const std::string &tag(const char *name) {
  // Interned so type_tag() can hand out references.
  static std::map<std::string, std::string> *table = new std::map<std::string, std::string>();
  auto it = table->find(name);
  if (it == table->end()) it = table->emplace(name, name).first;
  return it->second;
}

compute::Stationary stationary_family(BaseKernel::Family f) {
  switch (f) {
  case BaseKernel::Family::SquaredExponential:
    return compute::Stationary::SquaredExponential;
  case BaseKernel::Family::Matern12:
    return compute::Stationary::Matern12;
  case BaseKernel::Family::Matern32:
    return compute::Stationary::Matern32;
  default:
    return compute::Stationary::Matern52;
  }
}

void require_same_width(const Eigen::Ref<const Eigen::MatrixXd> &X,
                        const Eigen::Ref<const Eigen::MatrixXd> &X2) {
  if (X.cols() != X2.cols())
    throw Error(ErrorCode::DimensionMismatch,
                "inputs have " + std::to_string(X.cols()) + " and " +
                    std::to_string(X2.cols()) + " columns");
}

} // namespace

const char *family_name(BaseKernel::Family family) {
  switch (family) {
  case BaseKernel::Family::SquaredExponential:
    return "SquaredExponential";
  case BaseKernel::Family::Matern12:
    return "Matern12";
  case BaseKernel::Family::Matern32:
    return "Matern32";
  case BaseKernel::Family::Matern52:
    return "Matern52";
  case BaseKernel::Family::Linear:
    return "Linear";
  case BaseKernel::Family::White:
    return "White";
  }
  return "";
}

BaseKernel::Family family_from_name(const std::string &name) {
  for (auto f : {BaseKernel::Family::SquaredExponential, BaseKernel::Family::Matern12, BaseKernel::Family::Matern32,
                 BaseKernel::Family::Matern52, BaseKernel::Family::Linear, BaseKernel::Family::White})
    if (name == family_name(f)) return f;
  throw Error(ErrorCode::InvalidParameter, "unknown kernel family " + name);
}

BaseKernel::BaseKernel(Family family, KernelParams params)
    : family_(family), params_(std::move(params)) {
  if (!(params_.variance > 0.0))
    throw Error(ErrorCode::InvalidParameter, "kernel variance must be positive");
  if (stationary()) {
    if (params_.lengthscales.size() == 0 || (params_.lengthscales.array() <= 0.0).any())
      throw Error(ErrorCode::InvalidParameter, "lengthscales must be positive");
  } else {
    params_.lengthscales.resize(0);
  }
}

std::unique_ptr<BaseKernel> BaseKernel::make(Family family, double variance,
                                             double lengthscale) {
  return std::make_unique<BaseKernel>(
      family, KernelParams{variance, Eigen::VectorXd::Constant(1, lengthscale)});
}

bool BaseKernel::stationary() const {
  return family_ != Family::Linear && family_ != Family::White;
}

const std::string &BaseKernel::type_tag() const { return tag(family_name(family_)); }

std::unique_ptr<Kernel> BaseKernel::clone() const {
  return std::make_unique<BaseKernel>(*this);
}

void BaseKernel::visit_params(ParamVisitor &visitor, const std::string &prefix) {
  visitor.visit(prefix + "variance", as_span(params_.variance), Transform::Positive);
  if (stationary())
    visitor.visit(prefix + "lengthscales", as_span(params_.lengthscales), Transform::Positive);
}

Eigen::Index BaseKernel::input_dim() const {
  return params_.lengthscales.size() > 1 ? params_.lengthscales.size() : 0;
}

void BaseKernel::check_input(const Eigen::Ref<const Eigen::MatrixXd> &X) const {
  const Eigen::Index d = input_dim();
  if (d != 0 && X.cols() != d)
    throw Error(ErrorCode::DimensionMismatch,
                "kernel expects " + std::to_string(d) + " input columns, got " +
                    std::to_string(X.cols()));
}

Eigen::MatrixXd BaseKernel::k_full(const Eigen::Ref<const Eigen::MatrixXd> &X) const {
  if (family_ == Family::White) {
    check_input(X);
    return params_.variance * Eigen::MatrixXd::Identity(X.rows(), X.rows());
  }
  return k_full(X, X);
}

Eigen::MatrixXd BaseKernel::k_full(const Eigen::Ref<const Eigen::MatrixXd> &X,
                                   const Eigen::Ref<const Eigen::MatrixXd> &X2) const {
  check_input(X);
  check_input(X2);
  require_same_width(X, X2);
  switch (family_) {
  case Family::Linear:
    return params_.variance * X * X2.transpose();
  case Family::White:
    return Eigen::MatrixXd::Zero(X.rows(), X2.rows());
  default:
    return compute::stationary_gram(stationary_family(family_), params_.variance,
                                    params_.lengthscales, X, X2);
  }
}

Eigen::VectorXd BaseKernel::k_diag(const Eigen::Ref<const Eigen::MatrixXd> &X) const {
  check_input(X);
  if (family_ == Family::Linear) return params_.variance * X.rowwise().squaredNorm();
  return Eigen::VectorXd::Constant(X.rows(), params_.variance);
}

Tensor extract_patches(const Eigen::Ref<const Eigen::MatrixXd> &X, Eigen::Index height,
                       Eigen::Index width, Eigen::Index patch_h, Eigen::Index patch_w) {
  if (X.cols() != height * width)
    throw Error(ErrorCode::DimensionMismatch,
                "image rows have " + std::to_string(X.cols()) + " values, expected " +
                    std::to_string(height * width));
  if (patch_h < 1 || patch_w < 1 || patch_h > height || patch_w > width)
    throw Error(ErrorCode::PatchLargerThanImage,
                std::to_string(patch_h) + "x" + std::to_string(patch_w) + " patch on " +
                    std::to_string(height) + "x" + std::to_string(width) + " image");
  const Eigen::Index rows_out = height - patch_h + 1;
  const Eigen::Index cols_out = width - patch_w + 1;
  const Eigen::Index P = rows_out * cols_out;
  Tensor out({X.rows(), P, patch_h * patch_w});
  for (Eigen::Index n = 0; n < X.rows(); ++n)
    for (Eigen::Index r = 0; r < rows_out; ++r)
      for (Eigen::Index c = 0; c < cols_out; ++c)
        for (Eigen::Index i = 0; i < patch_h; ++i)
          for (Eigen::Index j = 0; j < patch_w; ++j)
            out(n, r * cols_out + c, i * patch_w + j) = X(n, (r + i) * width + (c + j));
  return out;
}

Convolutional::Convolutional(std::unique_ptr<SingleOutputKernel> base, Eigen::Index height,
                             Eigen::Index width, Eigen::Index patch_h, Eigen::Index patch_w)
    : base_(std::move(base)), height_(height), width_(width), patch_h_(patch_h),
      patch_w_(patch_w) {
  if (height < 1 || width < 1)
    throw Error(ErrorCode::InvalidParameter, "image dimensions must be positive");
  if (patch_h < 1 || patch_w < 1 || patch_h > height || patch_w > width)
    throw Error(ErrorCode::PatchLargerThanImage,
                std::to_string(patch_h) + "x" + std::to_string(patch_w) + " patch on " +
                    std::to_string(height) + "x" + std::to_string(width) + " image");
}

Convolutional::Convolutional(const Convolutional &other) = default;

Eigen::MatrixXd Convolutional::patches(const Eigen::Ref<const Eigen::MatrixXd> &X) const {
  const Tensor t = extract_patches(X, height_, width_, patch_h_, patch_w_);
  return t.as_matrix(X.rows() * num_patches(), patch_size());
}

const std::string &Convolutional::type_tag() const { return tag("Convolutional"); }

std::unique_ptr<Kernel> Convolutional::clone() const {
  return std::make_unique<Convolutional>(*this);
}

void Convolutional::visit_params(ParamVisitor &visitor, const std::string &prefix) {
  base_->visit_params(visitor, prefix + "base.");
}

Eigen::MatrixXd Convolutional::k_full(const Eigen::Ref<const Eigen::MatrixXd> &X) const {
  const Eigen::MatrixXd px = patches(X);
  return compute::block_sum(base_->k_full(px), num_patches(), num_patches());
}

Eigen::MatrixXd Convolutional::k_full(const Eigen::Ref<const Eigen::MatrixXd> &X,
                                      const Eigen::Ref<const Eigen::MatrixXd> &X2) const {
  const Eigen::MatrixXd px = patches(X);
  const Eigen::MatrixXd px2 = patches(X2);
  return compute::block_sum(base_->k_full(px, px2), num_patches(), num_patches());
}

Eigen::VectorXd Convolutional::k_diag(const Eigen::Ref<const Eigen::MatrixXd> &X) const {
  const Eigen::Index P = num_patches();
  const Eigen::MatrixXd px = patches(X);
  Eigen::VectorXd d(X.rows());
  for (Eigen::Index n = 0; n < X.rows(); ++n)
    d(n) = base_->k_full(px.middleRows(n * P, P)).sum();
  return d;
}

SharedIndependent::SharedIndependent(std::unique_ptr<SingleOutputKernel> base,
                                     Eigen::Index outputs)
    : base_(std::move(base)), outputs_(outputs) {
  if (outputs < 1) throw Error(ErrorCode::InvalidParameter, "output count must be positive");
}

const std::string &SharedIndependent::type_tag() const { return tag("SharedIndependent"); }

std::unique_ptr<Kernel> SharedIndependent::clone() const {
  return std::make_unique<SharedIndependent>(*this);
}

void SharedIndependent::visit_params(ParamVisitor &visitor, const std::string &prefix) {
  base_->visit_params(visitor, prefix + "base.");
}

Eigen::MatrixXd SharedIndependent::mixing() const {
  return Eigen::MatrixXd::Identity(outputs_, outputs_);
}

SeparateIndependent::SeparateIndependent(std::vector<Cloned<SingleOutputKernel>> kernels)
    : kernels_(std::move(kernels)) {
  if (kernels_.empty()) throw Error(ErrorCode::InvalidParameter, "no latent kernels given");
}

const std::string &SeparateIndependent::type_tag() const {
  return tag("SeparateIndependent");
}

std::unique_ptr<Kernel> SeparateIndependent::clone() const {
  return std::make_unique<SeparateIndependent>(*this);
}

void SeparateIndependent::visit_params(ParamVisitor &visitor, const std::string &prefix) {
  for (std::size_t l = 0; l < kernels_.size(); ++l)
    kernels_[l]->visit_params(visitor, prefix + "latent" + std::to_string(l) + ".");
}

const SingleOutputKernel &SeparateIndependent::latent(Eigen::Index l) const {
  return *kernels_.at(static_cast<std::size_t>(l));
}

Eigen::MatrixXd SeparateIndependent::mixing() const {
  return Eigen::MatrixXd::Identity(num_latent(), num_latent());
}

LinearCoregionalization::LinearCoregionalization(
    std::vector<Cloned<SingleOutputKernel>> kernels, Eigen::MatrixXd W)
    : kernels_(std::move(kernels)), W_(std::move(W)) {
  if (kernels_.empty()) throw Error(ErrorCode::InvalidParameter, "no latent kernels given");
  if (W_.rows() < 1 || (kernels_.size() != 1 &&
                        W_.cols() != static_cast<Eigen::Index>(kernels_.size())))
    throw Error(ErrorCode::ShapeMismatch,
                "mixing matrix has " + std::to_string(W_.cols()) + " columns for " +
                    std::to_string(kernels_.size()) + " latent kernels");
}

const std::string &LinearCoregionalization::type_tag() const {
  return tag("LinearCoregionalization");
}

std::unique_ptr<Kernel> LinearCoregionalization::clone() const {
  return std::make_unique<LinearCoregionalization>(*this);
}

void LinearCoregionalization::visit_params(ParamVisitor &visitor, const std::string &prefix) {
  for (std::size_t l = 0; l < kernels_.size(); ++l)
    kernels_[l]->visit_params(visitor, prefix + "latent" + std::to_string(l) + ".");
  visitor.visit(prefix + "W", as_span(W_), Transform::Identity);
}

const SingleOutputKernel &LinearCoregionalization::latent(Eigen::Index l) const {
  if (l < 0 || l >= num_latent()) throw Error(ErrorCode::ShapeMismatch, "latent index");
  return kernels_.size() == 1 ? *kernels_[0] : *kernels_[static_cast<std::size_t>(l)];
}

namespace {

std::vector<Cloned<SingleOutputKernel>> single(std::unique_ptr<SingleOutputKernel> base) {
  std::vector<Cloned<SingleOutputKernel>> v;
  v.emplace_back(std::move(base));
  return v;
}

} // namespace

IntrinsicCoregionalization::IntrinsicCoregionalization(
    std::unique_ptr<SingleOutputKernel> base, Eigen::MatrixXd W)
    : LinearCoregionalization(single(std::move(base)), std::move(W)) {}

const std::string &IntrinsicCoregionalization::type_tag() const {
  return tag("IntrinsicCoregionalization");
}

std::unique_ptr<Kernel> IntrinsicCoregionalization::clone() const {
  return std::make_unique<IntrinsicCoregionalization>(*this);
}

void IntrinsicCoregionalization::visit_params(ParamVisitor &visitor,
                                              const std::string &prefix) {
  kernels_[0]->visit_params(visitor, prefix + "base.");
  visitor.visit(prefix + "W", as_span(W_), Transform::Identity);
}

const SingleOutputKernel &as_single_output(const Kernel &kernel) {
  const auto *k = dynamic_cast<const SingleOutputKernel *>(&kernel);
  if (!k)
    throw Error(ErrorCode::UnsupportedCombination,
                kernel.type_tag() + " is not a single-output kernel");
  return *k;
}

Eigen::Index output_count(const Kernel &kernel) {
  if (const auto *mo = dynamic_cast<const MultioutputKernel *>(&kernel))
    return mo->num_outputs();
  return 1;
}

namespace {

// Latent Grams K_l(X, X2) (or K_l(X) when X2 is null), computed once per
// distinct kernel object.
std::vector<Eigen::MatrixXd> latent_grams(const MultioutputKernel &k,
                                          const Eigen::Ref<const Eigen::MatrixXd> &X,
                                          const Eigen::MatrixXd *X2) {
  std::vector<Eigen::MatrixXd> grams;
  const Eigen::Index L = k.num_latent();
  for (Eigen::Index l = 0; l < L; ++l) {
    if (l > 0 && k.shared_latent()) {
      grams.push_back(grams.front());
      continue;
    }
    grams.push_back(X2 ? k.latent(l).k_full(X, *X2) : k.latent(l).k_full(X));
  }
  return grams;
}

Tensor mo_k_impl(const Kernel &kernel, const Eigen::Ref<const Eigen::MatrixXd> &X,
                 const Eigen::MatrixXd *X2, bool full_output_cov) {
  const Eigen::Index N = X.rows();
  const Eigen::Index N2 = X2 ? X2->rows() : N;
  if (const auto *conv = dynamic_cast<const Convolutional *>(&kernel)) {
    const Eigen::Index P = conv->num_patches();
    const Eigen::MatrixXd px = conv->patches(X);
    const Eigen::MatrixXd px2 = X2 ? conv->patches(*X2) : px;
    if (full_output_cov) {
      const Eigen::MatrixXd g = X2 ? conv->base().k_full(px, px2) : conv->base().k_full(px);
      return Tensor::from_matrix(g, {N, P, N2, P});
    }
    Tensor out({P, N, N2});
    for (Eigen::Index p = 0; p < P; ++p) {
      Eigen::MatrixXd a(N, px.cols()), b(N2, px.cols());
      for (Eigen::Index n = 0; n < N; ++n) a.row(n) = px.row(n * P + p);
      for (Eigen::Index n = 0; n < N2; ++n) b.row(n) = px2.row(n * P + p);
      out.slice(p) = X2 ? conv->base().k_full(a, b) : conv->base().k_full(a);
    }
    return out;
  }
  if (const auto *mo = dynamic_cast<const MultioutputKernel *>(&kernel)) {
    const Eigen::Index P = mo->num_outputs();
    const Eigen::Index L = mo->num_latent();
    const auto grams = latent_grams(*mo, X, X2);
    if (!full_output_cov) {
      // Independent kernels: output p is latent p. LMC: latent Grams.
      Tensor out({L, N, N2});
      for (Eigen::Index l = 0; l < L; ++l) out.slice(l) = grams[static_cast<std::size_t>(l)];
      return out;
    }
    Tensor out({N, P, N2, P});
    if (!mo->outputs_correlated()) {
      for (Eigen::Index n = 0; n < N; ++n)
        for (Eigen::Index m = 0; m < N2; ++m)
          for (Eigen::Index p = 0; p < P; ++p)
            out(n, p, m, p) = grams[static_cast<std::size_t>(p)](n, m);
      return out;
    }
    const Eigen::MatrixXd W = mo->mixing();
    auto flat = out.as_matrix(N * P, N2 * P);
    for (Eigen::Index l = 0; l < L; ++l) {
      const Eigen::MatrixXd ww = W.col(l) * W.col(l).transpose();
      const auto &g = grams[static_cast<std::size_t>(l)];
      for (Eigen::Index n = 0; n < N; ++n)
        for (Eigen::Index m = 0; m < N2; ++m)
          flat.block(n * P, m * P, P, P) += g(n, m) * ww;
    }
    return out;
  }
  const auto &k = as_single_output(kernel);
  const Eigen::MatrixXd g = X2 ? k.k_full(X, *X2) : k.k_full(X);
  if (full_output_cov) return Tensor::from_matrix(g, {N, 1, N2, 1});
  return Tensor::from_matrix(g, {1, N, N2});
}

} // namespace

Tensor mo_k(const Kernel &kernel, const Eigen::Ref<const Eigen::MatrixXd> &X,
            bool full_output_cov) {
  return mo_k_impl(kernel, X, nullptr, full_output_cov);
}

Tensor mo_k(const Kernel &kernel, const Eigen::Ref<const Eigen::MatrixXd> &X,
            const Eigen::Ref<const Eigen::MatrixXd> &X2, bool full_output_cov) {
  const Eigen::MatrixXd x2 = X2;
  return mo_k_impl(kernel, X, &x2, full_output_cov);
}

Tensor mo_k_diag(const Kernel &kernel, const Eigen::Ref<const Eigen::MatrixXd> &X,
                 bool full_output_cov) {
  const Eigen::Index N = X.rows();
  if (const auto *conv = dynamic_cast<const Convolutional *>(&kernel)) {
    const Eigen::Index P = conv->num_patches();
    const Eigen::MatrixXd px = conv->patches(X);
    Tensor out(full_output_cov ? Tensor::Shape{N, P, P} : Tensor::Shape{N, P});
    for (Eigen::Index n = 0; n < N; ++n) {
      const Eigen::MatrixXd g = conv->base().k_full(px.middleRows(n * P, P));
      for (Eigen::Index p = 0; p < P; ++p) {
        if (!full_output_cov) {
          out(n, p) = g(p, p);
          continue;
        }
        for (Eigen::Index q = 0; q < P; ++q) out(n, p, q) = g(p, q);
      }
    }
    return out;
  }
  if (const auto *mo = dynamic_cast<const MultioutputKernel *>(&kernel)) {
    const Eigen::Index P = mo->num_outputs();
    const Eigen::Index L = mo->num_latent();
    Eigen::MatrixXd diags(N, L);
    for (Eigen::Index l = 0; l < L; ++l) {
      if (l > 0 && mo->shared_latent()) {
        diags.col(l) = diags.col(0);
        continue;
      }
      diags.col(l) = mo->latent(l).k_diag(X);
    }
    const Eigen::MatrixXd W = mo->mixing();
    if (!full_output_cov) {
      Tensor out({N, P});
      out.as_matrix(N, P) = diags * W.cwiseAbs2().transpose();
      return out;
    }
    Tensor out({N, P, P});
    for (Eigen::Index n = 0; n < N; ++n) {
      Eigen::Map<RowMatrix> slab(out.data() + n * P * P, P, P);
      slab = W * diags.row(n).asDiagonal() * W.transpose();
    }
    return out;
  }
  const Eigen::VectorXd d = as_single_output(kernel).k_diag(X);
  Tensor out(full_output_cov ? Tensor::Shape{N, 1, 1} : Tensor::Shape{N, 1});
  for (Eigen::Index n = 0; n < N; ++n) out.data()[n] = d(n);
  return out;
}

} // namespace ivgp
