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

#include "lpstain/classical.hpp"

#include <algorithm>
#include <numbers>
#include <vector>

#include "json.hpp"

#include "lpstain/fsutil.hpp"

namespace lpstain {

StainMatrix StainMatrix::standard_hed() {
  StainMatrix m;
  m.rows << 0.65, 0.70, 0.29,  //
      0.07, 0.99, 0.11,        //
      0.27, 0.57, 0.78;
  m.rows.rowwise().normalize();
  return m;
}

void StainMatrix::validate() const {
  for (int r = 0; r < 3; ++r) {
    if (std::abs(rows.row(r).norm() - 1.0) > 1e-6) {
      fail(ErrorCode::kRangeError, "stain row " + std::to_string(r) + " is not unit norm");
    }
    if (rows.row(r).minCoeff() < 0.0) {
      fail(ErrorCode::kRangeError, "stain row " + std::to_string(r) + " has a negative entry");
    }
  }
  if (std::abs(rows.determinant()) < 1e-9) {
    fail(ErrorCode::kRangeError, "stain matrix is singular");
  }
}

StainMatrix parse_stain_matrix_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kBadSidecar, std::string("stain matrix JSON: ") + e.what());
  }
  StainMatrix m;
  const char* names[3] = {"hematoxylin", "eosin", "residual"};
  try {
    for (int r = 0; r < 3; ++r) {
      const auto& row = j.at(names[r]);
      if (row.size() != 3) fail(ErrorCode::kBadSidecar, std::string(names[r]) + " needs 3 values");
      for (int c = 0; c < 3; ++c) m.rows(r, c) = row.at(c).get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kBadSidecar, std::string("stain matrix JSON: ") + e.what());
  }
  m.validate();
  return m;
}

StainMatrix load_stain_matrix_json(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_stain_matrix_json(std::string(bytes.begin(), bytes.end()));
}

std::string stain_matrix_json(const StainMatrix& m) {
  nlohmann::ordered_json j;
  const char* names[3] = {"hematoxylin", "eosin", "residual"};
  for (int r = 0; r < 3; ++r) {
    j[names[r]] = {m.rows(r, 0), m.rows(r, 1), m.rows(r, 2)};
  }
  return j.dump();
}

JitterDraw draw_jitter(const JitterConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> alpha(cfg.alpha_low, cfg.alpha_high);
  std::uniform_real_distribution<double> beta(cfg.beta_low, cfg.beta_high);
  JitterDraw d;
  for (int c = 0; c < 3; ++c) {
    d.alpha(c) = cfg.alpha_low == cfg.alpha_high ? cfg.alpha_low : alpha(rng);
    d.beta(c) = cfg.beta_low == cfg.beta_high ? cfg.beta_low : beta(rng);
  }
  return d;
}

double angle_degrees(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

namespace {

// Linear-interpolated percentile of an unsorted sample (p in [0, 100]).
double percentile(std::vector<double> v, double p) {
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  std::nth_element(v.begin(), v.begin() + lo, v.end());
  const double a = v[lo];
  if (lo + 1 >= v.size()) return a;
  const double b = *std::min_element(v.begin() + lo + 1, v.end());
  return a + (b - a) * (pos - static_cast<double>(lo));
}

constexpr double kFixedScale = 4294967296.0;  // 2^32

}  // namespace

StainMatrix macenko_separate(const Imagef& img, const MacenkoConfig& cfg) {
  if (img.range != RangeTag::kUnit) {
    fail(ErrorCode::kRangeError, "macenko_separate expects a unit-range image");
  }
  const Eigen::Index n = img.pixels.pixels();
  std::vector<Eigen::Vector3d> od;
  od.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Vector3d v;
    for (int c = 0; c < 3; ++c) {
      v(c) = -std::log10(std::max<double>(img.pixels.matrix()(c, i), kOdFloor));
    }
    if (v.maxCoeff() > cfg.io_cutoff) od.push_back(v);
  }
  const auto needed = static_cast<std::size_t>(std::ceil(0.001 * static_cast<double>(n)));
  if (od.size() < std::max<std::size_t>(needed, 2)) {
    fail(ErrorCode::kInsufficientTissue,
         std::to_string(od.size()) + " of " + std::to_string(n) +
             " pixels exceed the OD cutoff");
  }

  // Exact integer moments: the same multiset of pixels gives the same bits.
  __int128 s1[3] = {0, 0, 0};
  __int128 s2[3][3] = {};
  for (const auto& v : od) {
    std::int64_t q[3];
    for (int c = 0; c < 3; ++c) q[c] = std::llround(v(c) * kFixedScale);
    for (int a = 0; a < 3; ++a) {
      s1[a] += q[a];
      for (int b = a; b < 3; ++b) s2[a][b] += static_cast<__int128>(q[a]) * q[b];
    }
  }
  const double count = static_cast<double>(od.size());
  Eigen::Vector3d mean;
  for (int a = 0; a < 3; ++a) mean(a) = static_cast<double>(s1[a]) / kFixedScale / count;
  Eigen::Matrix3d cov;
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b) {
      const double e = static_cast<double>(s2[a][b]) / (kFixedScale * kFixedScale) / count;
      cov(a, b) = cov(b, a) = e - mean(a) * mean(b);
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d lambda = eig.eigenvalues();  // ascending
  if (!(lambda(2) > 0.0) || lambda(1) <= 1e-6 * lambda(2)) {
    fail(ErrorCode::kDegenerateCloud, "OD cloud is (close to) one-dimensional");
  }
  Eigen::Vector3d e1 = eig.eigenvectors().col(2);
  Eigen::Vector3d e2 = eig.eigenvectors().col(1);
  if (e1.sum() < 0.0) e1 = -e1;
  if (e2.sum() < 0.0) e2 = -e2;

  std::vector<double> angles;
  angles.reserve(od.size());
  for (const auto& v : od) angles.push_back(std::atan2(v.dot(e2), v.dot(e1)));
  const double lo = percentile(angles, cfg.alpha_percentile);
  const double hi = percentile(std::move(angles), 100.0 - cfg.alpha_percentile);

  Eigen::Vector3d v_lo = std::cos(lo) * e1 + std::sin(lo) * e2;
  Eigen::Vector3d v_hi = std::cos(hi) * e1 + std::sin(hi) * e2;
  if (v_lo.sum() < 0.0) v_lo = -v_lo;
  if (v_hi.sum() < 0.0) v_hi = -v_hi;
  v_lo = v_lo.cwiseMax(0.0).normalized();
  v_hi = v_hi.cwiseMax(0.0).normalized();

  StainMatrix m;
  const bool lo_is_h = v_lo(2) > v_hi(2);
  m.rows.row(0) = (lo_is_h ? v_lo : v_hi).transpose();
  m.rows.row(1) = (lo_is_h ? v_hi : v_lo).transpose();
  const Eigen::Vector3d third = m.rows.row(0).transpose().cross(m.rows.row(1).transpose()).cwiseAbs();
  if (third.norm() < 1e-9) {
    fail(ErrorCode::kDegenerateCloud, "recovered stain vectors are parallel");
  }
  m.rows.row(2) = third.normalized().transpose();
  return m;
}

}  // namespace lpstain
