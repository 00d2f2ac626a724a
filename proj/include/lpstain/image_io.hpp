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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lpstain/image.hpp"
#include "lpstain/pyramid.hpp"

namespace lpstain {

/// Decodes an 8-bit (or wider, stripped) PNG to a unit-range RGB image.
/// Gray, palette and alpha inputs are converted to plain RGB.
Imagef read_png(const std::filesystem::path& path);
Imagef decode_png(std::span<const std::uint8_t> bytes, const std::string& name);

/// Encodes to 8-bit RGB: maps to [0, 1], clamps, scales by 255 and rounds
/// half to even.
std::vector<std::uint8_t> encode_png(const Imagef& img);
void write_png(const std::filesystem::path& path, const Imagef& img);

/// Per-level quantization affine of a serialized pyramid:
/// value = stored * scale + offset, stored in [0, 1].
struct LevelAffine {
  double scale = 1.0;
  double offset = 0.0;
};

struct PyramidLevelRecord {
  int level = 0;
  bool residual = false;
  std::string file;
  int height = 0;
  int width = 0;
  LevelAffine affine;
};

struct PyramidSidecar {
  int levels = 0;
  RangeTag range = RangeTag::kUnit;
  std::optional<std::vector<double>> sigma;
  std::vector<PyramidLevelRecord> records;
};

inline constexpr const char* kSidecarName = "pyramid.json";

/// Writes level{k}.png per level plus pyramid.json into `dir`. Band-pass
/// level k is stored as (h / p_k + 1) / 2 with p_k = max|h_k|; the sidecar
/// records the affine.
PyramidSidecar write_pyramid(const std::filesystem::path& dir,
                             const LaplacianPyramid<float>& lp,
                             const std::optional<std::vector<double>>& sigma = {});

/// Reads a pyramid from a directory (or its pyramid.json).
LaplacianPyramid<float> read_pyramid(const std::filesystem::path& dir_or_sidecar,
                                     PyramidSidecar* sidecar_out = nullptr);

PyramidSidecar parse_sidecar(const std::string& text);
std::string sidecar_json(const PyramidSidecar& sidecar);

/// Decodes each PNG into the generator's symmetric range and averages the
/// band-pass peaks.
BPScales<float> compute_bp_scales(std::span<const std::filesystem::path> image_paths,
                                  const PyramidConfig<float>& cfg);

/// PNG files of a directory in name order.
std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir);

}  // namespace lpstain
