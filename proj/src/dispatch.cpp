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

#include "ivgp/dispatch.hpp"

#include <algorithm>

namespace ivgp {

TypeHierarchy::TypeHierarchy(std::string root) : root_(std::move(root)) {}

void TypeHierarchy::add(const std::string &tag, const std::string &parent) {
  if (tag == root_)
    throw Error(ErrorCode::DuplicateRegistration, "cannot re-parent the root " + root_);
  if (!contains(parent))
    throw Error(ErrorCode::NoImplementation, "unknown parent type " + parent);
  auto it = parent_.find(tag);
  if (it != parent_.end()) {
    if (it->second == parent) return;
    throw Error(ErrorCode::DuplicateRegistration,
                "type " + tag + " already has parent " + it->second);
  }
  parent_.emplace(tag, parent);
}

bool TypeHierarchy::contains(const std::string &tag) const {
  return tag == root_ || parent_.count(tag) > 0;
}

std::vector<std::string> TypeHierarchy::ancestors(const std::string &tag) const {
  if (!contains(tag)) throw Error(ErrorCode::NoImplementation, "unknown type " + tag);
  std::vector<std::string> chain{tag};
  while (chain.back() != root_) chain.push_back(parent_.at(chain.back()));
  return chain;
}

bool TypeHierarchy::is_a(const std::string &tag, const std::string &ancestor) const {
  const auto chain = ancestors(tag);
  return std::find(chain.begin(), chain.end(), ancestor) != chain.end();
}

std::vector<std::string> TypeHierarchy::tags() const {
  std::vector<std::string> out{root_};
  for (const auto &[tag, parent] : parent_) out.push_back(tag);
  return out;
}

TypeHierarchy &kernel_types() {
  static TypeHierarchy h = [] {
    TypeHierarchy t("Kernel");
    for (const char *tag : {"SquaredExponential", "Matern12", "Matern32", "Matern52",
                            "Linear", "White", "Convolutional", "MultioutputKernel"})
      t.add(tag, "Kernel");
    t.add("SharedIndependent", "MultioutputKernel");
    t.add("SeparateIndependent", "MultioutputKernel");
    t.add("LinearCoregionalization", "MultioutputKernel");
    t.add("IntrinsicCoregionalization", "LinearCoregionalization");
    return t;
  }();
  return h;
}

TypeHierarchy &inducing_types() {
  static TypeHierarchy h = [] {
    TypeHierarchy t("InducingVariable");
    t.add("InducingPoints", "InducingVariable");
    t.add("Multiscale", "InducingPoints");
    t.add("InducingPatches", "InducingPoints");
    t.add("SharedIndependentInducingVariables", "InducingVariable");
    t.add("SeparateIndependentInducingVariables", "InducingVariable");
    return t;
  }();
  return h;
}

Resolution resolve_pair(const TypeHierarchy &first_types,
                        const TypeHierarchy &second_types,
                        const std::vector<std::pair<std::string, std::string>> &keys,
                        const std::string &first, const std::string &second,
                        const std::string &registry_name) {
  const auto chain_a = first_types.ancestors(first);
  const auto chain_b = second_types.ancestors(second);
  struct Candidate {
    std::size_t da;
    std::size_t db;
    const std::pair<std::string, std::string> *key;
  };
  std::vector<Candidate> matches;
  for (const auto &key : keys) {
    const auto ia = std::find(chain_a.begin(), chain_a.end(), key.first);
    const auto ib = std::find(chain_b.begin(), chain_b.end(), key.second);
    if (ia == chain_a.end() || ib == chain_b.end()) continue;
    matches.push_back({static_cast<std::size_t>(ia - chain_a.begin()),
                       static_cast<std::size_t>(ib - chain_b.begin()), &key});
  }
  if (matches.empty())
    throw Error(ErrorCode::NoImplementation,
                registry_name + " has no implementation for (" + first + ", " + second + ")");
  for (const auto &c : matches) {
    const bool dominates = std::all_of(matches.begin(), matches.end(), [&](const Candidate &o) {
      return c.da <= o.da && c.db <= o.db;
    });
    if (dominates) return {c.key->first, c.key->second};
  }
  std::string names;
  for (const auto &c : matches) {
    if (!names.empty()) names += ", ";
    names += "(" + c.key->first + ", " + c.key->second + ")";
  }
  throw Error(ErrorCode::AmbiguityDetected,
              registry_name + " query (" + first + ", " + second +
                  ") matches incomparable entries " + names);
}

} // namespace ivgp
