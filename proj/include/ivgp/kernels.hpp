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

#ifndef IVGP_KERNELS_HPP_
#define IVGP_KERNELS_HPP_

#include <Eigen/Core>

#include <memory>
#include <string>
#include <vector>

#include "ivgp/params.hpp"
#include "ivgp/tensor.hpp"

namespace ivgp {

class Kernel {
public:
  virtual ~Kernel() = default;
  // Dispatch tag; see kernel_types().
  virtual const std::string &type_tag() const = 0;
  virtual std::unique_ptr<Kernel> clone() const = 0;
  virtual void visit_params(ParamVisitor &visitor, const std::string &prefix) = 0;
  virtual Eigen::Index num_outputs() const { return 1; }
};

class SingleOutputKernel : public Kernel {
public:
  // Gram of X with itself. Differs from k_full(X, X) only for White.
  virtual Eigen::MatrixXd k_full(const Eigen::Ref<const Eigen::MatrixXd> &X) const {
    return k_full(X, X);
  }
  virtual Eigen::MatrixXd k_full(const Eigen::Ref<const Eigen::MatrixXd> &X,
                                 const Eigen::Ref<const Eigen::MatrixXd> &X2) const = 0;
  virtual Eigen::VectorXd k_diag(const Eigen::Ref<const Eigen::MatrixXd> &X) const = 0;
  // Required column count of inputs, or 0 if any width is accepted.
  virtual Eigen::Index input_dim() const = 0;
};

struct KernelParams {
  double variance = 1.0;
  // One entry per input dimension or a single shared entry.
  Eigen::VectorXd lengthscales = Eigen::VectorXd::Ones(1);
};

class BaseKernel final : public SingleOutputKernel {
public:
  enum class Family { SquaredExponential, Matern12, Matern32, Matern52, Linear, White };

  BaseKernel(Family family, KernelParams params);
  static std::unique_ptr<BaseKernel> make(Family family, double variance,
                                          double lengthscale = 1.0);

  Family family() const { return family_; }
  const KernelParams &params() const { return params_; }
  KernelParams &params() { return params_; }
  bool stationary() const;

  const std::string &type_tag() const override;
  std::unique_ptr<Kernel> clone() const override;
  void visit_params(ParamVisitor &visitor, const std::string &prefix) override;

  using SingleOutputKernel::k_full;
  Eigen::MatrixXd k_full(const Eigen::Ref<const Eigen::MatrixXd> &X) const override;
  Eigen::MatrixXd k_full(const Eigen::Ref<const Eigen::MatrixXd> &X,
                         const Eigen::Ref<const Eigen::MatrixXd> &X2) const override;
  Eigen::VectorXd k_diag(const Eigen::Ref<const Eigen::MatrixXd> &X) const override;
  Eigen::Index input_dim() const override;

private:
  void check_input(const Eigen::Ref<const Eigen::MatrixXd> &X) const;

  Family family_;
  KernelParams params_;
};

const char *family_name(BaseKernel::Family family);
BaseKernel::Family family_from_name(const std::string &name);

// Image patches: row n of X is an H x W image in row-major order. Returns a
// N x P x (h*w) tensor with patches in row-major raster order, stride 1.
Tensor extract_patches(const Eigen::Ref<const Eigen::MatrixXd> &X, Eigen::Index height,
                       Eigen::Index width, Eigen::Index patch_h, Eigen::Index patch_w);

// f(x) = sum_p g(x^[p]) with g ~ GP(0, k_g). As a single-output kernel it is
// the patch double sum; mo_k exposes the per-patch responses as P outputs.
class Convolutional final : public SingleOutputKernel {
public:
  Convolutional(std::unique_ptr<SingleOutputKernel> base, Eigen::Index height,
                Eigen::Index width, Eigen::Index patch_h, Eigen::Index patch_w);
  Convolutional(const Convolutional &other);

  const SingleOutputKernel &base() const { return *base_; }
  Eigen::Index height() const { return height_; }
  Eigen::Index width() const { return width_; }
  Eigen::Index patch_h() const { return patch_h_; }
  Eigen::Index patch_w() const { return patch_w_; }
  Eigen::Index num_patches() const {
    return (height_ - patch_h_ + 1) * (width_ - patch_w_ + 1);
  }
  Eigen::Index patch_size() const { return patch_h_ * patch_w_; }
  // (N * P) x (h * w) matrix of patches, row n * P + p.
  Eigen::MatrixXd patches(const Eigen::Ref<const Eigen::MatrixXd> &X) const;

  const std::string &type_tag() const override;
  std::unique_ptr<Kernel> clone() const override;
  void visit_params(ParamVisitor &visitor, const std::string &prefix) override;

  using SingleOutputKernel::k_full;
  Eigen::MatrixXd k_full(const Eigen::Ref<const Eigen::MatrixXd> &X) const override;
  Eigen::MatrixXd k_full(const Eigen::Ref<const Eigen::MatrixXd> &X,
                         const Eigen::Ref<const Eigen::MatrixXd> &X2) const override;
  Eigen::VectorXd k_diag(const Eigen::Ref<const Eigen::MatrixXd> &X) const override;
  Eigen::Index input_dim() const override { return height_ * width_; }

private:
  Cloned<SingleOutputKernel> base_;
  Eigen::Index height_;
  Eigen::Index width_;
  Eigen::Index patch_h_;
  Eigen::Index patch_w_;
};

// Matrix-valued kernel k({x,p},{x',p'}) = sum_l W[p,l] k_l(x,x') W[p',l].
class MultioutputKernel : public Kernel {
public:
  Eigen::Index num_outputs() const override = 0;
  virtual Eigen::Index num_latent() const = 0;
  virtual const SingleOutputKernel &latent(Eigen::Index l) const = 0;
  // P x L mixing matrix.
  virtual Eigen::MatrixXd mixing() const = 0;
  // True when outputs share latent processes, so output marginals are not
  // enough to describe the prior.
  virtual bool outputs_correlated() const = 0;
  // True when every latent uses the same kernel object.
  virtual bool shared_latent() const = 0;
};

class SharedIndependent final : public MultioutputKernel {
public:
  SharedIndependent(std::unique_ptr<SingleOutputKernel> base, Eigen::Index outputs);
  const std::string &type_tag() const override;
  std::unique_ptr<Kernel> clone() const override;
  void visit_params(ParamVisitor &visitor, const std::string &prefix) override;
  Eigen::Index num_outputs() const override { return outputs_; }
  Eigen::Index num_latent() const override { return outputs_; }
  const SingleOutputKernel &latent(Eigen::Index) const override { return *base_; }
  Eigen::MatrixXd mixing() const override;
  bool outputs_correlated() const override { return false; }
  bool shared_latent() const override { return true; }

private:
  Cloned<SingleOutputKernel> base_;
  Eigen::Index outputs_;
};

class SeparateIndependent final : public MultioutputKernel {
public:
  explicit SeparateIndependent(std::vector<Cloned<SingleOutputKernel>> kernels);
  const std::string &type_tag() const override;
  std::unique_ptr<Kernel> clone() const override;
  void visit_params(ParamVisitor &visitor, const std::string &prefix) override;
  Eigen::Index num_outputs() const override { return num_latent(); }
  Eigen::Index num_latent() const override {
    return static_cast<Eigen::Index>(kernels_.size());
  }
  const SingleOutputKernel &latent(Eigen::Index l) const override;
  Eigen::MatrixXd mixing() const override;
  bool outputs_correlated() const override { return false; }
  bool shared_latent() const override { return false; }

private:
  std::vector<Cloned<SingleOutputKernel>> kernels_;
};

class LinearCoregionalization : public MultioutputKernel {
public:
  LinearCoregionalization(std::vector<Cloned<SingleOutputKernel>> kernels, Eigen::MatrixXd W);
  const std::string &type_tag() const override;
  std::unique_ptr<Kernel> clone() const override;
  void visit_params(ParamVisitor &visitor, const std::string &prefix) override;
  Eigen::Index num_outputs() const override { return W_.rows(); }
  Eigen::Index num_latent() const override { return W_.cols(); }
  const SingleOutputKernel &latent(Eigen::Index l) const override;
  Eigen::MatrixXd mixing() const override { return W_; }
  Eigen::MatrixXd &W() { return W_; }
  bool outputs_correlated() const override { return true; }
  bool shared_latent() const override { return kernels_.size() == 1; }

protected:
  std::vector<Cloned<SingleOutputKernel>> kernels_;
  Eigen::MatrixXd W_;
};

// One latent kernel shared by all L latent processes.
class IntrinsicCoregionalization final : public LinearCoregionalization {
public:
  IntrinsicCoregionalization(std::unique_ptr<SingleOutputKernel> base, Eigen::MatrixXd W);
  const std::string &type_tag() const override;
  std::unique_ptr<Kernel> clone() const override;
  void visit_params(ParamVisitor &visitor, const std::string &prefix) override;
};

const SingleOutputKernel &as_single_output(const Kernel &kernel);

/*
 * Multioutput Gram in one of two layouts:
 *   full_output_cov = true:  N x P x N2 x P
 *   full_output_cov = false: P x N x N2 output marginals for independent
 *                            kernels and Convolutional, L x N x N2 latent
 *                            Grams for LinearCoregionalization.
 * Single-output kernels are treated as P = 1. With X2 absent the Gram is
 * of X with itself.
 */
Tensor mo_k(const Kernel &kernel, const Eigen::Ref<const Eigen::MatrixXd> &X,
            bool full_output_cov);
Tensor mo_k(const Kernel &kernel, const Eigen::Ref<const Eigen::MatrixXd> &X,
            const Eigen::Ref<const Eigen::MatrixXd> &X2, bool full_output_cov);

// N x P x P when full_output_cov, else N x P output marginal variances.
Tensor mo_k_diag(const Kernel &kernel, const Eigen::Ref<const Eigen::MatrixXd> &X,
                 bool full_output_cov);

// Number of outputs a kernel predicts: P for multioutput kernels, 1 otherwise.
Eigen::Index output_count(const Kernel &kernel);

} // namespace ivgp

#endif // IVGP_KERNELS_HPP_
