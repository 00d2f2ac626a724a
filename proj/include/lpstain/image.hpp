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

#include <string_view>

#include "lpstain/tensor.hpp"

namespace lpstain {

enum class RangeTag { kUnit, kSymmetric };

inline std::string_view range_name(RangeTag tag) {
  return tag == RangeTag::kUnit ? "unit" : "symmetric";
}

inline RangeTag parse_range(std::string_view name) {
  if (name == "unit") return RangeTag::kUnit;
  if (name == "symmetric") return RangeTag::kSymmetric;
  fail(ErrorCode::kBadSidecar, "unknown range tag '" + std::string(name) + "'");
}

/// An RGB raster in planar layout with a declared value range.
template <typename Scalar>
struct Image {
  Tensor<Scalar> pixels;
  RangeTag range = RangeTag::kUnit;

  Image() = default;
  Image(Tensor<Scalar> t, RangeTag tag) : pixels(std::move(t)), range(tag) {
    if (pixels.channels() != 3) {
      fail(ErrorCode::kShapeMismatch,
           "image needs 3 channels, got " + pixels.shape_string());
    }
  }

  int height() const { return pixels.height(); }
  int width() const { return pixels.width(); }

  Scalar lower_bound() const {
    return range == RangeTag::kUnit ? Scalar(0) : Scalar(-1);
  }

  // Values lie inside the declared range, with a small slack for rounding.
  bool in_range(Scalar slack = Scalar(1e-6)) const {
    if (pixels.empty()) return true;
    return pixels.all_finite() &&
           pixels.matrix().minCoeff() >= lower_bound() - slack &&
           pixels.matrix().maxCoeff() <= Scalar(1) + slack;
  }
};

template <typename Scalar>
Image<Scalar> to_symmetric(const Image<Scalar>& img) {
  if (img.range == RangeTag::kSymmetric) return img;
  Tensor<Scalar> t(
      (img.pixels.matrix().array() * Scalar(2) - Scalar(1)).matrix(),
      img.height(), img.width());
  return Image<Scalar>(std::move(t), RangeTag::kSymmetric);
}

/// Maps back to [0, 1], clamping anything the network pushed outside.
template <typename Scalar>
Image<Scalar> to_unit(const Image<Scalar>& img) {
  if (img.range == RangeTag::kUnit) {
    Tensor<Scalar> t(img.pixels.matrix().cwiseMax(Scalar(0)).cwiseMin(Scalar(1)),
                     img.height(), img.width());
    return Image<Scalar>(std::move(t), RangeTag::kUnit);
  }
  Tensor<Scalar> t(((img.pixels.matrix().array() + Scalar(1)) * Scalar(0.5))
                       .max(Scalar(0))
                       .min(Scalar(1))
                       .matrix(),
                   img.height(), img.width());
  return Image<Scalar>(std::move(t), RangeTag::kUnit);
}

using Imagef = Image<float>;

}  // namespace lpstain
