/* Copyright 2026 The dcl Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcl {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXd = RowMatrix<double>;

inline Index shape_size(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ']';
  return os.str();
}

/// Dense row-major n-dimensional array. Rank-4 tensors are laid out NCHW.
template <typename Scalar_>
class TensorT {
 public:
  using Scalar = Scalar_;
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  TensorT() = default;

  explicit TensorT(Shape dims, Scalar fill = Scalar(0)) : dims_(std::move(dims)) {
    check_dims();
    data_ = Storage::Constant(shape_size(dims_), fill);
  }

  TensorT(Shape dims, Storage data) : dims_(std::move(dims)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != shape_size(dims_)) {
      throw std::invalid_argument("tensor: data length " + std::to_string(data_.size()) +
                                  " does not match dims " + shape_str(dims_));
    }
  }

  TensorT(Shape dims, std::initializer_list<Scalar> values)
      : TensorT(std::move(dims), Eigen::Map<const Storage>(values.begin(), Index(values.size()))) {}

  static TensorT zeros_like(const TensorT& other) { return TensorT(other.dims_); }

  const Shape& dims() const { return dims_; }
  Index rank() const { return Index(dims_.size()); }
  Index dim(Index axis) const { return dims_.at(size_t(axis)); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Storage& data() { return data_; }
  const Storage& data() const { return data_; }
  Scalar* ptr() { return data_.data(); }
  const Scalar* ptr() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  // NCHW accessors.
  Scalar& at(Index n, Index c, Index h, Index w) { return data_[offset(n, c, h, w)]; }
  Scalar at(Index n, Index c, Index h, Index w) const { return data_[offset(n, c, h, w)]; }
  Index offset(Index n, Index c, Index h, Index w) const {
    return ((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w;
  }

  /// Row-major matrix view over the whole buffer.
  Eigen::Map<RowMatrix<Scalar>> matrix(Index rows, Index cols) {
    check_view(rows, cols);
    return {data_.data(), rows, cols};
  }
  Eigen::Map<const RowMatrix<Scalar>> matrix(Index rows, Index cols) const {
    check_view(rows, cols);
    return {data_.data(), rows, cols};
  }

  TensorT reshaped(Shape dims) const {
    if (shape_size(dims) != size()) {
      throw std::invalid_argument("reshape: cannot view " + shape_str(dims_) + " as " +
                                  shape_str(dims));
    }
    return TensorT(std::move(dims), data_);
  }

  bool same_shape(const TensorT& other) const { return dims_ == other.dims_; }

  friend bool operator==(const TensorT& a, const TensorT& b) {
    return a.dims_ == b.dims_ && (a.data_ == b.data_).all();
  }

 private:
  void check_dims() const {
    for (Index d : dims_) {
      if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension in " + shape_str(dims_));
    }
  }
  void check_view(Index rows, Index cols) const {
    if (rows * cols != size()) throw std::invalid_argument("tensor: bad matrix view");
  }

  Shape dims_;
  Storage data_;
};

using Tensor = TensorT<double>;

/// Single-channel H x W map stored as a [1,1,H,W] tensor.
inline Tensor make_map(Index height, Index width, double fill = 0.0) {
  return Tensor({1, 1, height, width}, fill);
}

}  // namespace dcl
