/* Copyright 2026 The lpstain Authors. All Rights Reserved.

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

#include <algorithm>
#include <cmath>
#include <string>

#include "lpstain/error.hpp"

namespace lpstain {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Row-major dense matrix; the layout every weight matrix and activation
// plane uses.
template <typename Scalar>
using RowMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense CHW activation tensor.
///
/// Storage is a `channels x (height*width)` row-major matrix, so one row is
/// one channel plane and a convolution is a single GEMM against an im2col
/// buffer.
template <typename Scalar>
class Tensor {
 public:
  using Storage = RowMatrix<Scalar>;
  using PlaneMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstPlaneMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() = default;
  Tensor(int channels, int height, int width)
      : storage_(channels, static_cast<Eigen::Index>(height) * width),
        height_(height),
        width_(width) {}
  Tensor(Storage storage, int height, int width)
      : storage_(std::move(storage)), height_(height), width_(width) {
    if (storage_.cols() != static_cast<Eigen::Index>(height) * width) {
      fail(ErrorCode::kShapeMismatch, "storage does not match " +
                                          std::to_string(height) + "x" +
                                          std::to_string(width));
    }
  }

  static Tensor Zero(int channels, int height, int width) {
    Tensor t(channels, height, width);
    t.storage_.setZero();
    return t;
  }
  static Tensor Constant(int channels, int height, int width, Scalar value) {
    Tensor t(channels, height, width);
    t.storage_.setConstant(value);
    return t;
  }

  int channels() const { return static_cast<int>(storage_.rows()); }
  int height() const { return height_; }
  int width() const { return width_; }
  Eigen::Index pixels() const { return storage_.cols(); }
  Eigen::Index size() const { return storage_.size(); }
  bool empty() const { return storage_.size() == 0; }

  Storage& matrix() { return storage_; }
  const Storage& matrix() const { return storage_; }
  Scalar* data() { return storage_.data(); }
  const Scalar* data() const { return storage_.data(); }

  Scalar& operator()(int c, int y, int x) {
    return storage_(c, static_cast<Eigen::Index>(y) * width_ + x);
  }
  Scalar operator()(int c, int y, int x) const {
    return storage_(c, static_cast<Eigen::Index>(y) * width_ + x);
  }

  PlaneMap plane(int c) {
    return PlaneMap(storage_.row(c).data(), height_, width_);
  }
  ConstPlaneMap plane(int c) const {
    return ConstPlaneMap(storage_.row(c).data(), height_, width_);
  }

  bool same_shape(const Tensor& other) const {
    return channels() == other.channels() && height_ == other.height_ &&
           width_ == other.width_;
  }

  bool all_finite() const { return storage_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(storage_.template cast<Other>(), height_, width_);
  }

  std::string shape_string() const {
    return "(" + std::to_string(channels()) + ", " + std::to_string(height_) +
           ", " + std::to_string(width_) + ")";
  }

 private:
  Storage storage_;
  int height_ = 0;
  int width_ = 0;
};

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::kShapeMismatch,
         a.shape_string() + " + " + b.shape_string());
  }
  return Tensor<Scalar>(a.matrix() + b.matrix(), a.height(), a.width());
}

template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::kShapeMismatch,
         a.shape_string() + " - " + b.shape_string());
  }
  return Tensor<Scalar>(a.matrix() - b.matrix(), a.height(), a.width());
}

template <typename Scalar>
Tensor<Scalar> operator*(Scalar s, const Tensor<Scalar>& a) {
  return Tensor<Scalar>(s * a.matrix(), a.height(), a.width());
}

template <typename Scalar>
Scalar max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::kShapeMismatch,
         a.shape_string() + " vs " + b.shape_string());
  }
  if (a.empty()) return Scalar(0);
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

// Bitwise equality, distinct from `==` on values only in the NaN/-0 cases.
template <typename Scalar>
bool bit_identical(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (!a.same_shape(b)) return false;
  return std::equal(
      reinterpret_cast<const unsigned char*>(a.data()),
      reinterpret_cast<const unsigned char*>(a.data() + a.size()),
      reinterpret_cast<const unsigned char*>(b.data()));
}

using Tensorf = Tensor<float>;
using Vectorf = Vector<float>;
using RowMatrixf = RowMatrix<float>;

}  // namespace lpstain
