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

#ifndef IVGP_TENSOR_HPP_
#define IVGP_TENSOR_HPP_

#include <Eigen/Core>

#include <array>
#include <initializer_list>
#include <vector>

#include "ivgp/errors.hpp"

namespace ivgp {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/*
 * Dense n-d array in C order: the last index varies fastest.
 *
 * This is the layout of every multioutput covariance in the library. A
 * N x P x N x P tensor reinterpreted as a (N*P) x (N*P) matrix has row index
 * n * P + p, which is the stacking order of the outputs of a matrix-valued
 * kernel. Reshaping never moves elements.
 */
class Tensor {
public:
  using Shape = std::vector<Eigen::Index>;

  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(count(shape_), fill) {}

  Tensor(std::initializer_list<Eigen::Index> shape, double fill = 0.0)
      : Tensor(Shape(shape), fill) {}

  const Shape &shape() const { return shape_; }
  Eigen::Index rank() const { return static_cast<Eigen::Index>(shape_.size()); }
  Eigen::Index dim(Eigen::Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Eigen::Index size() const { return static_cast<Eigen::Index>(data_.size()); }

  double *data() { return data_.data(); }
  const double *data() const { return data_.data(); }

  template <typename... Idx> double &operator()(Idx... idx) {
    return data_[offset({static_cast<Eigen::Index>(idx)...})];
  }
  template <typename... Idx> double operator()(Idx... idx) const {
    return data_[offset({static_cast<Eigen::Index>(idx)...})];
  }

  Eigen::Map<RowMatrix> as_matrix(Eigen::Index rows, Eigen::Index cols) {
    check_size(rows * cols);
    return Eigen::Map<RowMatrix>(data_.data(), rows, cols);
  }
  Eigen::Map<const RowMatrix> as_matrix(Eigen::Index rows,
                                        Eigen::Index cols) const {
    check_size(rows * cols);
    return Eigen::Map<const RowMatrix>(data_.data(), rows, cols);
  }

  // Contiguous 2-d slice along the leading index, e.g. the p-th N x N block of
  // a P x N x N tensor.
  Eigen::Map<const RowMatrix> slice(Eigen::Index lead) const {
    require_rank(3);
    const Eigen::Index stride = shape_[1] * shape_[2];
    return Eigen::Map<const RowMatrix>(data_.data() + lead * stride, shape_[1],
                                       shape_[2]);
  }
  Eigen::Map<RowMatrix> slice(Eigen::Index lead) {
    require_rank(3);
    const Eigen::Index stride = shape_[1] * shape_[2];
    return Eigen::Map<RowMatrix>(data_.data() + lead * stride, shape_[1],
                                 shape_[2]);
  }

  Tensor reshaped(Shape shape) const {
    Tensor out = *this;
    if (count(shape) != size()) {
      throw Error(ErrorCode::ShapeMismatch, "reshape changes element count");
    }
    out.shape_ = std::move(shape);
    return out;
  }

  static Tensor from_matrix(const Eigen::Ref<const RowMatrix> &m, Shape shape) {
    Tensor out(std::move(shape));
    out.as_matrix(m.rows(), m.cols()) = m;
    return out;
  }

  bool operator==(const Tensor &other) const = default;

private:
  static Eigen::Index count(const Shape &shape) {
    Eigen::Index n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

  std::size_t offset(std::initializer_list<Eigen::Index> idx) const {
    if (idx.size() != shape_.size()) {
      throw Error(ErrorCode::ShapeMismatch, "tensor index rank mismatch");
    }
    Eigen::Index off = 0;
    std::size_t k = 0;
    for (auto i : idx) {
      off = off * shape_[k++] + i;
    }
    return static_cast<std::size_t>(off);
  }

  void check_size(Eigen::Index n) const {
    if (n != size()) {
      throw Error(ErrorCode::ShapeMismatch, "matrix view changes element count");
    }
  }

  void require_rank(Eigen::Index r) const {
    if (rank() != r) {
      throw Error(ErrorCode::ShapeMismatch, "unexpected tensor rank");
    }
  }

  Shape shape_;
  std::vector<double> data_;
};

} // namespace ivgp

#endif // IVGP_TENSOR_HPP_
