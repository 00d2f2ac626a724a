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

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "lpstain/image.hpp"

namespace lpstain {

/// Rows are unit-norm optical-density vectors: hematoxylin, eosin, and a
/// third (DAB or residual) stain.
struct StainMatrix {
  Eigen::Matrix3d rows;

  /// Published H/E/DAB vectors of the color-deconvolution literature.
  static StainMatrix standard_hed();

  void validate() const;
};

StainMatrix parse_stain_matrix_json(const std::string& text);
StainMatrix load_stain_matrix_json(const std::filesystem::path& path);
std::string stain_matrix_json(const StainMatrix& m);

inline constexpr double kOdFloor = 1.0 / 255.0;

/// Optical density -log10(max(rgb, floor)) projected onto the stains.
/// Returns a 3-channel tensor of stain concentrations.
template <typename Scalar>
Tensor<Scalar> rgb_to_hed(const Image<Scalar>& img,
                          const StainMatrix& m = StainMatrix::standard_hed()) {
  if (img.range != RangeTag::kUnit) {
    fail(ErrorCode::kRangeError, "rgb_to_hed expects a unit-range image");
  }
  const Eigen::Matrix<Scalar, 3, 3> unmix =
      m.rows.transpose().inverse().template cast<Scalar>();
  const auto od = -(img.pixels.matrix()
                        .array()
                        .max(static_cast<Scalar>(kOdFloor))
                        .log10());
  RowMatrix<Scalar> hed = unmix * od.matrix();
  return Tensor<Scalar>(std::move(hed), img.height(), img.width());
}

/// Inverse of rgb_to_hed, clamped to [0, 1].
template <typename Scalar>
Image<Scalar> hed_to_rgb(const Tensor<Scalar>& hed,
                         const StainMatrix& m = StainMatrix::standard_hed()) {
  if (hed.channels() != 3) fail(ErrorCode::kShapeMismatch, "HED needs 3 channels");
  const Eigen::Matrix<Scalar, 3, 3> mix = m.rows.transpose().template cast<Scalar>();
  RowMatrix<Scalar> od = mix * hed.matrix();
  const Scalar ln10 = static_cast<Scalar>(std::log(10.0));
  RowMatrix<Scalar> rgb =
      (-od.array() * ln10).exp().max(Scalar(0)).min(Scalar(1)).matrix();
  return Image<Scalar>(Tensor<Scalar>(std::move(rgb), hed.height(), hed.width()),
                       RangeTag::kUnit);
}

/// Uniform multiplicative (alpha) and additive (beta) noise ranges.
struct JitterConfig {
  double alpha_low = 0.95;
  double alpha_high = 1.05;
  double beta_low = -0.05;
  double beta_high = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha_low <= 1.0 && 1.0 <= alpha_high)) {
      fail(ErrorCode::kRangeError, "alpha range must contain 1");
    }
    if (!(beta_low <= 0.0 && 0.0 <= beta_high)) {
      fail(ErrorCode::kRangeError, "beta range must contain 0");
    }
  }
};

/// Per-channel draws, in the order alpha_0, beta_0, alpha_1, beta_1, ...
struct JitterDraw {
  Eigen::Vector3d alpha;
  Eigen::Vector3d beta;
};

JitterDraw draw_jitter(const JitterConfig& cfg);

/// s' = s * alpha_c + beta_c on each HED channel, then back to RGB.
template <typename Scalar>
Image<Scalar> hed_jitter(const Image<Scalar>& img, const JitterConfig& cfg,
                         const StainMatrix& m = StainMatrix::standard_hed()) {
  cfg.validate();
  const JitterDraw d = draw_jitter(cfg);
  Tensor<Scalar> hed = rgb_to_hed(img, m);
  for (int c = 0; c < 3; ++c) {
    hed.matrix().row(c) =
        (hed.matrix().row(c).array() * static_cast<Scalar>(d.alpha(c)) +
         static_cast<Scalar>(d.beta(c)))
            .matrix();
  }
  return hed_to_rgb(hed, m);
}

struct MacenkoConfig {
  double io_cutoff = 0.15;
  double alpha_percentile = 1.0;
};

/// Macenko stain estimation: principal plane of the tissue OD cloud,
/// extreme angular percentiles as stain vectors, H ordered first (larger
/// blue-channel OD). The third row is the normalized |H x E|.
///
/// Tissue pixels are those with any channel OD above the cutoff. Moments
/// are accumulated in fixed point so the result does not depend on pixel
/// order.
StainMatrix macenko_separate(const Imagef& img, const MacenkoConfig& cfg = {});

double angle_degrees(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

}  // namespace lpstain
