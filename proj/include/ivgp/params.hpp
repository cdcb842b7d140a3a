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

#ifndef IVGP_PARAMS_HPP_
#define IVGP_PARAMS_HPP_

#include <Eigen/Core>

#include <memory>
#include <span>
#include <string>
#include <utility>

namespace ivgp {

// Domain of a parameter block; the training module maps each to an
// unconstrained space.
enum class Transform {
  Identity,
  Positive,
  // Packed lower-triangular factor whose diagonal stays positive.
  LowerTriangularPositiveDiag,
};

// Walks the mutable parameter blocks of a model component. Names are
// dot-separated paths such as "kernel.latent1.lengthscales".
class ParamVisitor {
public:
  virtual ~ParamVisitor() = default;
  virtual void visit(const std::string &name, std::span<double> values, Transform transform,
                     Eigen::Index tri_dim = 0) = 0;
};

inline std::span<double> as_span(Eigen::MatrixXd &m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
inline std::span<double> as_span(Eigen::VectorXd &v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
inline std::span<double> as_span(double &x) { return {&x, 1}; }

// Owning pointer with deep copy, so models holding polymorphic parts stay
// regular value types.
template <typename T> class Cloned {
public:
  Cloned() = default;
  Cloned(std::unique_ptr<T> p) : ptr_(std::move(p)) {}
  template <typename U>
  Cloned(std::unique_ptr<U> p) : ptr_(std::move(p)) {}
  Cloned(const Cloned &other) : ptr_(copy(other.ptr_.get())) {}
  Cloned(Cloned &&) noexcept = default;
  Cloned &operator=(const Cloned &other) {
    if (this != &other) ptr_ = copy(other.ptr_.get());
    return *this;
  }
  Cloned &operator=(Cloned &&) noexcept = default;

  T &operator*() const { return *ptr_; }
  T *operator->() const { return ptr_.get(); }
  T *get() const { return ptr_.get(); }
  explicit operator bool() const { return static_cast<bool>(ptr_); }

private:
  // clone() may return a base-class pointer to an object of dynamic type T.
  static std::unique_ptr<T> copy(const T *p) {
    if (!p) return nullptr;
    auto c = p->clone();
    return std::unique_ptr<T>(static_cast<T *>(c.release()));
  }

  std::unique_ptr<T> ptr_;
};

} // namespace ivgp

#endif // IVGP_PARAMS_HPP_
