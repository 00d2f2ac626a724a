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

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "lpstain/image.hpp"
#include "lpstain/tensor.hpp"

namespace lpstain {

/// Pyramid depth and low-pass filter.
///
/// The filter is the 5-tap binomial kernel applied separably with reflect
/// borders; upsampling is zero insertion followed by the same kernel scaled
/// by 4 (2 per axis).
template <typename Scalar>
struct PyramidConfig {
  int levels = 3;
  std::array<Scalar, 5> taps = {Scalar(1) / 16, Scalar(4) / 16,
                                Scalar(6) / 16, Scalar(4) / 16,
                                Scalar(1) / 16};

  void validate() const {
    if (levels < 1) {
      fail(ErrorCode::kLevelOutOfRange,
           "pyramid needs K >= 1, got " + std::to_string(levels));
    }
    Scalar sum = 0;
    for (Scalar t : taps) sum += t;
    if (std::abs(sum - Scalar(1)) > Scalar(1e-7)) {
      fail(ErrorCode::kRangeError, "kernel taps must sum to 1");
    }
    if (taps[0] != taps[4] || taps[1] != taps[3]) {
      fail(ErrorCode::kRangeError, "kernel must be symmetric");
    }
  }
};

template <typename Scalar>
struct GaussianPyramid {
  std::vector<Tensor<Scalar>> levels;  // I_0 .. I_K
  RangeTag range = RangeTag::kUnit;
};

/// Band-pass images h_0..h_{K-1} plus the low-resolution residual I_K.
///
/// A band slot may be left empty by partial synthesis (levels below the
/// requested output level); every consumer only touches the slots it needs.
template <typename Scalar>
struct LaplacianPyramid {
  std::vector<Tensor<Scalar>> bandpass;
  Tensor<Scalar> residual;
  RangeTag range = RangeTag::kUnit;

  int levels() const { return static_cast<int>(bandpass.size()); }
};

/// Non-learnable band-pass scaling: the pathway input is multiplied by rho_k
/// and its output by sigma_k = 1 / rho_k.
template <typename Scalar>
struct BPScales {
  std::vector<Scalar> sigma;
  std::vector<Scalar> rho;

  static BPScales from_sigma(std::vector<Scalar> sigma) {
    BPScales s;
    for (std::size_t k = 0; k < sigma.size(); ++k) {
      if (!(sigma[k] > Scalar(0)) || !std::isfinite(sigma[k])) {
        fail(ErrorCode::kDegenerateScale,
             "sigma_" + std::to_string(k) + " = " + std::to_string(sigma[k]) +
                 " is not strictly positive");
      }
    }
    s.rho.reserve(sigma.size());
    for (Scalar v : sigma) s.rho.push_back(Scalar(1) / v);
    s.sigma = std::move(sigma);
    return s;
  }

  int levels() const { return static_cast<int>(sigma.size()); }
};

namespace detail {

// Mirror reflection without edge repetition: -1 -> 1, n -> n - 2.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

inline int half_ceil(int n) { return (n + 1) / 2; }

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> blur(const Tensor<Scalar>& src, const PyramidConfig<Scalar>& cfg) {
  const int h = src.height();
  const int w = src.width();
  Tensor<Scalar> out(src.channels(), h, w);
  RowMatrix<Scalar> tmp(h, w);
  for (int c = 0; c < src.channels(); ++c) {
    auto in = src.plane(c);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        Scalar acc = 0;
        for (int j = 0; j < 5; ++j) {
          acc += cfg.taps[j] * in(y, detail::reflect_index(x + j - 2, w));
        }
        tmp(y, x) = acc;
      }
    }
    auto dst = out.plane(c);
    for (int y = 0; y < h; ++y) {
      int rows[5];
      for (int j = 0; j < 5; ++j) rows[j] = detail::reflect_index(y + j - 2, h);
      for (int x = 0; x < w; ++x) {
        Scalar acc = 0;
        for (int j = 0; j < 5; ++j) acc += cfg.taps[j] * tmp(rows[j], x);
        dst(y, x) = acc;
      }
    }
  }
  return out;
}

/// Blur, then keep even-indexed rows and columns. Output is ceil(n/2).
template <typename Scalar>
Tensor<Scalar> downsample2(const Tensor<Scalar>& src,
                           const PyramidConfig<Scalar>& cfg) {
  const Tensor<Scalar> blurred = blur(src, cfg);
  const int h = detail::half_ceil(src.height());
  const int w = detail::half_ceil(src.width());
  Tensor<Scalar> out(src.channels(), h, w);
  for (int c = 0; c < src.channels(); ++c) {
    auto in = blurred.plane(c);
    auto dst = out.plane(c);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) dst(y, x) = in(2 * y, 2 * x);
  }
  return out;
}

/// Zero insertion to (height, width) followed by the 4x-scaled low-pass.
/// The target must be a parent size of `src`, i.e. ceil(target/2) == src.
template <typename Scalar>
Tensor<Scalar> upsample2(const Tensor<Scalar>& src, int height, int width,
                         const PyramidConfig<Scalar>& cfg) {
  if (detail::half_ceil(height) != src.height() ||
      detail::half_ceil(width) != src.width()) {
    fail(ErrorCode::kDimMismatch,
         "cannot upsample " + src.shape_string() + " to " +
             std::to_string(height) + "x" + std::to_string(width));
  }
  std::array<Scalar, 5> taps2;
  for (int j = 0; j < 5; ++j) taps2[j] = Scalar(2) * cfg.taps[j];

  const int sh = src.height();
  Tensor<Scalar> out(src.channels(), height, width);
  RowMatrix<Scalar> tmp(sh, width);
  for (int c = 0; c < src.channels(); ++c) {
    auto in = src.plane(c);
    for (int y = 0; y < sh; ++y) {
      for (int x = 0; x < width; ++x) {
        Scalar acc = 0;
        for (int j = 0; j < 5; ++j) {
          const int xr = detail::reflect_index(x + j - 2, width);
          if ((xr & 1) == 0) acc += taps2[j] * in(y, xr / 2);
        }
        tmp(y, x) = acc;
      }
    }
    auto dst = out.plane(c);
    for (int y = 0; y < height; ++y) {
      int rows[5];
      int count = 0;
      Scalar weights[5];
      for (int j = 0; j < 5; ++j) {
        const int yr = detail::reflect_index(y + j - 2, height);
        if ((yr & 1) == 0) {
          rows[count] = yr / 2;
          weights[count] = taps2[j];
          ++count;
        }
      }
      for (int x = 0; x < width; ++x) {
        Scalar acc = 0;
        for (int j = 0; j < count; ++j) acc += weights[j] * tmp(rows[j], x);
        dst(y, x) = acc;
      }
    }
  }
  return out;
}

template <typename Scalar>
void check_pyramid_dims(int height, int width, int levels) {
  const int need = 1 << levels;
  if (height < need || width < need) {
    fail(ErrorCode::kDimsTooSmall,
         std::to_string(height) + "x" + std::to_string(width) +
             " is smaller than 2^K = " + std::to_string(need));
  }
}

template <typename Scalar>
GaussianPyramid<Scalar> build_gaussian(const Image<Scalar>& img,
                                       const PyramidConfig<Scalar>& cfg) {
  cfg.validate();
  check_pyramid_dims<Scalar>(img.height(), img.width(), cfg.levels);
  GaussianPyramid<Scalar> gp;
  gp.range = img.range;
  gp.levels.reserve(cfg.levels + 1);
  gp.levels.push_back(img.pixels);
  for (int k = 0; k < cfg.levels; ++k) {
    gp.levels.push_back(downsample2(gp.levels.back(), cfg));
  }
  return gp;
}

template <typename Scalar>
LaplacianPyramid<Scalar> build_laplacian(const Image<Scalar>& img,
                                         const PyramidConfig<Scalar>& cfg) {
  GaussianPyramid<Scalar> gp = build_gaussian(img, cfg);
  LaplacianPyramid<Scalar> lp;
  lp.range = img.range;
  lp.bandpass.reserve(cfg.levels);
  for (int k = 0; k < cfg.levels; ++k) {
    const Tensor<Scalar>& fine = gp.levels[k];
    lp.bandpass.push_back(
        fine - upsample2(gp.levels[k + 1], fine.height(), fine.width(), cfg));
  }
  lp.residual = std::move(gp.levels.back());
  return lp;
}

/// Runs I_k = h_k + up(I_{k+1}) from the residual down to `level` and
/// returns I_level. `level == K` returns the residual itself.
template <typename Scalar>
Tensor<Scalar> reconstruct_at_level(const LaplacianPyramid<Scalar>& lp,
                                    int level,
                                    const PyramidConfig<Scalar>& cfg) {
  if (level < 0 || level > lp.levels()) {
    fail(ErrorCode::kLevelOutOfRange,
         "level " + std::to_string(level) + " outside [0, " +
             std::to_string(lp.levels()) + "]");
  }
  Tensor<Scalar> current = lp.residual;
  for (int k = lp.levels() - 1; k >= level; --k) {
    const Tensor<Scalar>& band = lp.bandpass[k];
    if (band.channels() != current.channels()) {
      fail(ErrorCode::kDimMismatch,
           "h_" + std::to_string(k) + " " + band.shape_string() +
               " vs lower level " + current.shape_string());
    }
    current = band + upsample2(current, band.height(), band.width(), cfg);
  }
  return current;
}

template <typename Scalar>
Image<Scalar> reconstruct(const LaplacianPyramid<Scalar>& lp,
                          const PyramidConfig<Scalar>& cfg) {
  return Image<Scalar>(reconstruct_at_level(lp, 0, cfg), lp.range);
}

/// All Gaussian levels I_0..I_K implied by a Laplacian pyramid, computed
/// along the same arithmetic path as `reconstruct_at_level`. Levels below
/// `lowest` are left empty.
template <typename Scalar>
std::vector<Tensor<Scalar>> gaussian_levels(const LaplacianPyramid<Scalar>& lp,
                                            const PyramidConfig<Scalar>& cfg,
                                            int lowest = 0) {
  std::vector<Tensor<Scalar>> out(lp.levels() + 1);
  out[lp.levels()] = lp.residual;
  for (int k = lp.levels() - 1; k >= lowest; --k) {
    const Tensor<Scalar>& band = lp.bandpass[k];
    if (band.channels() != out[k + 1].channels()) {
      fail(ErrorCode::kDimMismatch, "h_" + std::to_string(k) + " channels");
    }
    out[k] = band + upsample2(out[k + 1], band.height(), band.width(), cfg);
  }
  return out;
}

/// Peak absolute value of each band of one pyramid.
template <typename Scalar>
std::vector<Scalar> bandpass_peaks(const LaplacianPyramid<Scalar>& lp) {
  std::vector<Scalar> peaks;
  for (const auto& band : lp.bandpass) {
    peaks.push_back(band.empty() ? Scalar(0)
                                 : band.matrix().cwiseAbs().maxCoeff());
  }
  return peaks;
}

/// sigma_k = mean over the dataset of max|h_k|; rho_k = 1 / sigma_k.
template <typename Scalar>
BPScales<Scalar> compute_bp_scales(std::span<const Image<Scalar>> images,
                                   const PyramidConfig<Scalar>& cfg) {
  if (images.empty()) fail(ErrorCode::kEmptyDataset, "no images");
  std::vector<std::vector<double>> peaks(cfg.levels);
  for (const auto& img : images) {
    const auto p = bandpass_peaks(build_laplacian(img, cfg));
    for (int k = 0; k < cfg.levels; ++k) peaks[k].push_back(p[k]);
  }
  // Sorted summation keeps the result independent of dataset order.
  std::vector<Scalar> sigma;
  for (auto& level : peaks) {
    std::sort(level.begin(), level.end());
    double sum = 0.0;
    for (double v : level) sum += v;
    sigma.push_back(static_cast<Scalar>(sum / static_cast<double>(level.size())));
  }
  return BPScales<Scalar>::from_sigma(std::move(sigma));
}

}  // namespace lpstain
