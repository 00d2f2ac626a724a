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

#include "lpstain/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace lpstain {
namespace {

Imagef from_density(const RowMatrix<double>& od, int height, int width) {
  Tensorf t(3, height, width);
  t.matrix() = (-od.array() * std::log(10.0)).exp().min(1.0).max(0.0).cast<float>().matrix();
  return Imagef(std::move(t), RangeTag::kUnit);
}

}  // namespace

Imagef synthetic_tissue(int height, int width, std::uint64_t seed,
                        const StainMatrix& stains) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const Eigen::Index n = static_cast<Eigen::Index>(height) * width;
  std::vector<double> hema(n, 0.0), eosin(n, 0.0);

  // Low-frequency eosin texture from a few random sinusoids.
  struct Wave { double fx, fy, phase, amp; };
  std::vector<Wave> waves;
  for (int i = 0; i < 6; ++i) {
    waves.push_back({uni(rng) * 6.0 / width, uni(rng) * 6.0 / height,
                     uni(rng) * 6.283185307179586, 0.05 + 0.1 * uni(rng)});
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = 0.35;
      for (const auto& w : waves) {
        v += w.amp * std::sin(6.283185307179586 * (w.fx * x + w.fy * y) + w.phase);
      }
      eosin[static_cast<Eigen::Index>(y) * width + x] = std::max(0.02, v);
    }
  }

  // Nuclei: soft discs, density scaled with area.
  const int nuclei = std::max(4, static_cast<int>(n / 900));
  for (int i = 0; i < nuclei; ++i) {
    const double cx = uni(rng) * width;
    const double cy = uni(rng) * height;
    const double r = 3.0 + 6.0 * uni(rng);
    const double peak = 0.6 + 0.6 * uni(rng);
    const int x0 = std::max(0, static_cast<int>(cx - 2 * r));
    const int x1 = std::min(width - 1, static_cast<int>(cx + 2 * r));
    const int y0 = std::max(0, static_cast<int>(cy - 2 * r));
    const int y1 = std::min(height - 1, static_cast<int>(cy + 2 * r));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (r * r);
        hema[static_cast<Eigen::Index>(y) * width + x] += peak * std::exp(-d2 * d2);
      }
    }
  }

  RowMatrix<double> od(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = std::min(hema[i], 1.4);
    od.col(i) = h * stains.rows.row(0).transpose() + eosin[i] * stains.rows.row(1).transpose();
  }
  return from_density(od, height, width);
}

Imagef synthetic_two_stain(int height, int width, std::uint64_t seed,
                           const Eigen::Vector3d& h_vector,
                           const Eigen::Vector3d& e_vector, double od_noise) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, od_noise > 0.0 ? od_noise : 1.0);
  const Eigen::Vector3d h = h_vector.normalized();
  const Eigen::Vector3d e = e_vector.normalized();
  // Keep every channel's OD below the 8-bit floor log10(255) ~ 2.4.
  const double cap = 2.0 / std::max(h.maxCoeff(), e.maxCoeff());
  const Eigen::Index n = static_cast<Eigen::Index>(height) * width;
  RowMatrix<double> od(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = uni(rng);
    double ch = (0.2 + 0.8 * uni(rng)) * cap * 0.5;
    double ce = (0.2 + 0.8 * uni(rng)) * cap * 0.5;
    if (u < 0.1) ce = 0.0;
    else if (u < 0.2) ch = 0.0;
    Eigen::Vector3d v = ch * h + ce * e;
    if (od_noise > 0.0) {
      for (int c = 0; c < 3; ++c) v(c) += noise(rng);
    }
    od.col(i) = v.cwiseMax(0.0);
  }
  return from_density(od, height, width);
}

}  // namespace lpstain
