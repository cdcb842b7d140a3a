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

#include "ivgp/inducing.hpp"

#include <map>

#include "ivgp/errors.hpp"

namespace ivgp {
namespace {

const std::string &tag(const char *name) {
  static const auto *table = new std::map<std::string, std::string>{
      {"InducingPoints", "InducingPoints"},
      {"Multiscale", "Multiscale"},
      {"InducingPatches", "InducingPatches"},
      {"SharedIndependentInducingVariables", "SharedIndependentInducingVariables"},
      {"SeparateIndependentInducingVariables", "SeparateIndependentInducingVariables"},
  };
  return table->at(name);
}

} // namespace

InducingPoints::InducingPoints(Eigen::MatrixXd Z) : Z_(std::move(Z)) {
  if (Z_.rows() < 1) throw Error(ErrorCode::InvalidParameter, "need at least one inducing input");
}

const std::string &InducingPoints::type_tag() const { return tag("InducingPoints"); }

std::unique_ptr<InducingVariable> InducingPoints::clone() const {
  return std::make_unique<InducingPoints>(*this);
}

void InducingPoints::visit_params(ParamVisitor &visitor, const std::string &prefix) {
  visitor.visit(prefix + "Z", as_span(Z_), Transform::Identity);
}

Multiscale::Multiscale(Eigen::MatrixXd Z, Eigen::MatrixXd scales)
    : InducingPoints(std::move(Z)), scales_(std::move(scales)) {
  if (scales_.rows() != Z_.rows() || scales_.cols() != Z_.cols())
    throw Error(ErrorCode::ShapeMismatch, "scales must have the shape of Z");
  if ((scales_.array() <= 0.0).any())
    throw Error(ErrorCode::InvalidParameter, "multiscale widths must be positive");
}

const std::string &Multiscale::type_tag() const { return tag("Multiscale"); }

std::unique_ptr<InducingVariable> Multiscale::clone() const {
  return std::make_unique<Multiscale>(*this);
}

void Multiscale::visit_params(ParamVisitor &visitor, const std::string &prefix) {
  InducingPoints::visit_params(visitor, prefix);
  visitor.visit(prefix + "scales", as_span(scales_), Transform::Positive);
}

const std::string &InducingPatches::type_tag() const { return tag("InducingPatches"); }

std::unique_ptr<InducingVariable> InducingPatches::clone() const {
  return std::make_unique<InducingPatches>(*this);
}

SharedIndependentInducingVariables::SharedIndependentInducingVariables(
    std::unique_ptr<InducingVariable> base)
    : base_(std::move(base)) {
  if (is_latent_inducing(*base_))
    throw Error(ErrorCode::UnsupportedCombination, "latent inducing variables cannot nest");
}

const std::string &SharedIndependentInducingVariables::type_tag() const {
  return tag("SharedIndependentInducingVariables");
}

std::unique_ptr<InducingVariable> SharedIndependentInducingVariables::clone() const {
  return std::make_unique<SharedIndependentInducingVariables>(*this);
}

void SharedIndependentInducingVariables::visit_params(ParamVisitor &visitor,
                                                      const std::string &prefix) {
  base_->visit_params(visitor, prefix + "base.");
}

SeparateIndependentInducingVariables::SeparateIndependentInducingVariables(
    std::vector<Cloned<InducingVariable>> parts)
    : parts_(std::move(parts)) {
  if (parts_.empty()) throw Error(ErrorCode::InvalidParameter, "no inducing parts given");
  for (const auto &p : parts_)
    if (is_latent_inducing(*p))
      throw Error(ErrorCode::UnsupportedCombination, "latent inducing variables cannot nest");
}

const InducingVariable &SeparateIndependentInducingVariables::part(Eigen::Index l) const {
  return *parts_.at(static_cast<std::size_t>(l));
}

const std::string &SeparateIndependentInducingVariables::type_tag() const {
  return tag("SeparateIndependentInducingVariables");
}

std::unique_ptr<InducingVariable> SeparateIndependentInducingVariables::clone() const {
  return std::make_unique<SeparateIndependentInducingVariables>(*this);
}

void SeparateIndependentInducingVariables::visit_params(ParamVisitor &visitor,
                                                        const std::string &prefix) {
  for (std::size_t l = 0; l < parts_.size(); ++l)
    parts_[l]->visit_params(visitor, prefix + "part" + std::to_string(l) + ".");
}

bool is_latent_inducing(const InducingVariable &iv) {
  return dynamic_cast<const SharedIndependentInducingVariables *>(&iv) ||
         dynamic_cast<const SeparateIndependentInducingVariables *>(&iv);
}

const InducingVariable &latent_part(const InducingVariable &iv, Eigen::Index l) {
  if (const auto *s = dynamic_cast<const SharedIndependentInducingVariables *>(&iv))
    return s->base();
  if (const auto *s = dynamic_cast<const SeparateIndependentInducingVariables *>(&iv))
    return s->part(l);
  return iv;
}

namespace {

Eigen::Index latent_count(const Kernel &kernel) {
  if (const auto *mo = dynamic_cast<const MultioutputKernel *>(&kernel)) return mo->num_latent();
  return 1;
}

} // namespace

Eigen::Index num_inducing(const InducingVariable &iv, const Kernel &kernel) {
  if (const auto *s = dynamic_cast<const SharedIndependentInducingVariables *>(&iv))
    return s->size() * latent_count(kernel);
  if (const auto *s = dynamic_cast<const SeparateIndependentInducingVariables *>(&iv)) {
    const Eigen::Index L = latent_count(kernel);
    if (s->num_parts() != L)
      throw Error(ErrorCode::ShapeMismatch,
                  std::to_string(s->num_parts()) + " inducing parts for " +
                      std::to_string(L) + " latent processes");
    Eigen::Index total = 0;
    for (Eigen::Index l = 0; l < L; ++l) total += s->part(l).size();
    return total;
  }
  return iv.size() * output_count(kernel);
}

} // namespace ivgp
