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

#ifndef IVGP_DISPATCH_HPP_
#define IVGP_DISPATCH_HPP_

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ivgp/errors.hpp"

namespace ivgp {

// Single-inheritance tree of type tags used for dispatch fallback.
class TypeHierarchy {
public:
  explicit TypeHierarchy(std::string root);

  // Adds `tag` below `parent`. Re-adding with the same parent is a no-op.
  void add(const std::string &tag, const std::string &parent);
  bool contains(const std::string &tag) const;
  const std::string &root() const { return root_; }
  // `tag` first, root last.
  std::vector<std::string> ancestors(const std::string &tag) const;
  bool is_a(const std::string &tag, const std::string &ancestor) const;
  std::vector<std::string> tags() const;

private:
  std::string root_;
  std::map<std::string, std::string> parent_;
};

TypeHierarchy &kernel_types();
TypeHierarchy &inducing_types();

// Describes how a (first, second) query maps onto registered pairs.
struct Resolution {
  std::string first;
  std::string second;
};

// Resolves a pair of tags against the registered implementations. A
// registered pair (a, b) matches a query (x, y) when x is-a a and y is-a b;
// among matches the one that is no farther than every other match in both
// coordinates wins. If no such match exists the query is ambiguous.
Resolution resolve_pair(const TypeHierarchy &first_types,
                        const TypeHierarchy &second_types,
                        const std::vector<std::pair<std::string, std::string>> &keys,
                        const std::string &first, const std::string &second,
                        const std::string &registry_name);

template <typename Fn> class DispatchRegistry {
public:
  DispatchRegistry(std::string name, const TypeHierarchy &first_types,
                   const TypeHierarchy &second_types)
      : name_(std::move(name)), first_types_(first_types), second_types_(second_types) {}

  void add(const std::string &first, const std::string &second, Fn fn) {
    if (frozen_)
      throw Error(ErrorCode::RegistryFrozen, name_ + " no longer accepts registrations");
    const auto key = std::make_pair(first, second);
    if (impls_.count(key))
      throw Error(ErrorCode::DuplicateRegistration,
                  name_ + " already has (" + first + ", " + second + ")");
    impls_.emplace(key, std::move(fn));
    keys_.push_back(key);
  }

  bool contains(const std::string &first, const std::string &second) const {
    return impls_.count({first, second}) > 0;
  }

  Resolution which(const std::string &first, const std::string &second) const {
    return resolve_pair(first_types_, second_types_, keys_, first, second, name_);
  }

  const Fn &resolve(const std::string &first, const std::string &second) const {
    const Resolution r = which(first, second);
    return impls_.at({r.first, r.second});
  }

  // Checks every pair of known tags for ambiguous resolution, then refuses
  // further registrations.
  void freeze() {
    for (const auto &a : first_types_.tags())
      for (const auto &b : second_types_.tags()) {
        try {
          which(a, b);
        } catch (const Error &e) {
          if (e.code() == ErrorCode::AmbiguityDetected) throw;
        }
      }
    frozen_ = true;
  }
  bool frozen() const { return frozen_; }
  std::size_t size() const { return impls_.size(); }
  const std::string &name() const { return name_; }

private:
  std::string name_;
  const TypeHierarchy &first_types_;
  const TypeHierarchy &second_types_;
  std::map<std::pair<std::string, std::string>, Fn> impls_;
  std::vector<std::pair<std::string, std::string>> keys_;
  bool frozen_ = false;
};

} // namespace ivgp

#endif // IVGP_DISPATCH_HPP_
