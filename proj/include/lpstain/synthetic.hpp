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

#include "lpstain/classical.hpp"
#include "lpstain/image.hpp"

namespace lpstain {

/// Deterministic H&E-like tile: hematoxylin-rich round nuclei over an
/// eosin background with smooth texture, composed through Beer-Lambert
/// absorption. Unit range.
Imagef synthetic_tissue(int height, int width, std::uint64_t seed,
                        const StainMatrix& stains = StainMatrix::standard_hed());

/// Two-stain fixture with known vectors: every pixel is c_H * H + c_E * E
/// in optical density (plus optional Gaussian OD noise). About a fifth of
/// the pixels carry only one stain so the angular extremes are populated.
Imagef synthetic_two_stain(int height, int width, std::uint64_t seed,
                           const Eigen::Vector3d& h_vector,
                           const Eigen::Vector3d& e_vector, double od_noise = 0.0);

}  // namespace lpstain
