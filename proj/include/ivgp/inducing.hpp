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

#ifndef IVGP_INDUCING_HPP_
#define IVGP_INDUCING_HPP_

#include <Eigen/Core>

#include <memory>
#include <string>
#include <vector>

#include "ivgp/kernels.hpp"
#include "ivgp/params.hpp"

namespace ivgp {

class InducingVariable {
public:
  virtual ~InducingVariable() = default;
  // Dispatch tag; see inducing_types().
  virtual const std::string &type_tag() const = 0;
  virtual std::unique_ptr<InducingVariable> clone() const = 0;
  virtual void visit_params(ParamVisitor &visitor, const std::string &prefix) = 0;
  // Number of inducing definitions M, before any output or latent stacking.
  virtual Eigen::Index size() const = 0;
};

// u = f(Z) for each row of Z.
class InducingPoints : public InducingVariable {
public:
  explicit InducingPoints(Eigen::MatrixXd Z);
  const Eigen::MatrixXd &Z() const { return Z_; }
  Eigen::MatrixXd &Z() { return Z_; }

  const std::string &type_tag() const override;
  std::unique_ptr<InducingVariable> clone() const override;
  void visit_params(ParamVisitor &visitor, const std::string &prefix) override;
  Eigen::Index size() const override { return Z_.rows(); }

protected:
  Eigen::MatrixXd Z_;
};

// u_m = integral of f against a normalized Gaussian window centred at z_m
// with per-dimension standard deviations scales(m, :).
class Multiscale final : public InducingPoints {
public:
  Multiscale(Eigen::MatrixXd Z, Eigen::MatrixXd scales);
  const Eigen::MatrixXd &scales() const { return scales_; }

  const std::string &type_tag() const override;
  std::unique_ptr<InducingVariable> clone() const override;
  void visit_params(ParamVisitor &visitor, const std::string &prefix) override;

private:
  Eigen::MatrixXd scales_;
};

// u_m = g(z_m) where g is the patch response function of a Convolutional
// kernel; rows of Z are flattened patches.
class InducingPatches final : public InducingPoints {
public:
  using InducingPoints::InducingPoints;
  const std::string &type_tag() const override;
  std::unique_ptr<InducingVariable> clone() const override;
};

// One inducing set reused by every latent process.
class SharedIndependentInducingVariables final : public InducingVariable {
public:
  explicit SharedIndependentInducingVariables(std::unique_ptr<InducingVariable> base);
  const InducingVariable &base() const { return *base_; }

  const std::string &type_tag() const override;
  std::unique_ptr<InducingVariable> clone() const override;
  void visit_params(ParamVisitor &visitor, const std::string &prefix) override;
  Eigen::Index size() const override { return base_->size(); }

private:
  Cloned<InducingVariable> base_;
};

// One inducing set per latent process.
class SeparateIndependentInducingVariables final : public InducingVariable {
public:
  explicit SeparateIndependentInducingVariables(std::vector<Cloned<InducingVariable>> parts);
  Eigen::Index num_parts() const { return static_cast<Eigen::Index>(parts_.size()); }
  const InducingVariable &part(Eigen::Index l) const;

  const std::string &type_tag() const override;
  std::unique_ptr<InducingVariable> clone() const override;
  void visit_params(ParamVisitor &visitor, const std::string &prefix) override;
  // Size of the first part; parts may differ, see num_inducing.
  Eigen::Index size() const override { return parts_.front()->size(); }

private:
  std::vector<Cloned<InducingVariable>> parts_;
};

// True for the latent-stacked (shared or separate independent) variants.
bool is_latent_inducing(const InducingVariable &iv);

// Inducing variables of latent process l of a latent-stacked variable.
const InducingVariable &latent_part(const InducingVariable &iv, Eigen::Index l);

// Total inducing count M~: M for single-output kernels, M * P for inducing
// points under a P-output kernel, sum over latents for shared or separate
// independent variables.
Eigen::Index num_inducing(const InducingVariable &iv, const Kernel &kernel);

} // namespace ivgp

#endif // IVGP_INDUCING_HPP_
