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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lpstain/nn.hpp"

namespace lpstain {

enum class ModelKind : std::uint8_t {
  kGenerator = 1,
  kDiscriminator = 2,
  kFeatureExtractor = 3,
};

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct StoredTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t element_count() const;
};

/// Named-tensor container behind the GSW1 file format.
///
/// `levels` is the pyramid depth K for generators and discriminators and
/// the stage count for feature extractors; `latent_dim` is d_s for
/// generators and 0 otherwise. Tensors are kept in name order, which is
/// also the on-disk order.
struct WeightStore {
  ModelKind kind = ModelKind::kGenerator;
  int levels = 0;
  int latent_dim = 0;
  std::map<std::string, StoredTensor> tensors;

  const StoredTensor& at(const std::string& name) const;

  nn::ConvLayer<float> conv(const std::string& prefix,
                            const nn::ConvSpec& spec) const;
  nn::DenseLayer<float> dense(const std::string& prefix, int out, int in) const;
};

/// The exact tensor inventory (name -> dims) a store of this kind must hold.
std::map<std::string, std::vector<std::uint32_t>> expected_inventory(
    ModelKind kind, int levels, int latent_dim);

std::vector<std::uint8_t> save(const WeightStore& store);
WeightStore load(std::span<const std::uint8_t> bytes);

void save_file(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_file(const std::filesystem::path& path);

/// He-style fan-in initialization with zero biases. Generator stores also
/// get `bp.sigma` filled with a placeholder scale of 0.25 per level.
WeightStore init_random(ModelKind kind, int levels, int latent_dim,
                        std::uint64_t seed);

/// One line per tensor: name, shape, min/max/mean; name order.
std::string inspect(const WeightStore& store);

inline constexpr float kPlaceholderSigma = 0.25f;

}  // namespace lpstain
