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
#include <string>
#include <vector>

#include "lpstain/nn.hpp"

// Channel plans for every network in the toolkit. The weight store derives
// its tensor inventory from these lists, the networks load by the same
// names, and the analytic MAC counter walks the same shapes.
namespace lpstain::arch {

inline constexpr int kResidualEncodingWidth = 256;
inline constexpr int kSmnEncoderHidden = 64;
inline constexpr int kSmnDecoderHidden0 = 64;
inline constexpr int kSmnDecoderHidden1 = 128;
inline constexpr int kDefaultLatentDim = 8;
inline constexpr int kDiscChannels[] = {64, 128, 256, 512};
inline constexpr int kFeatureChannels[] = {16, 32, 64, 128};
inline constexpr int kFeatureStages = 4;

/// Base width of band-pass level k. The channel multiplier is (k + 1) so
/// that level 0 is well-formed and finer levels get fewer filters.
inline int band_width(int k) { return (k + 1) * 16; }
inline int band_encoding_width(int k) { return 2 * band_width(k); }

/// AdaIN width of pathway `k` in a K-level generator (k == K is residual).
inline int pathway_width(int k, int levels) {
  return k == levels ? kResidualEncodingWidth : band_encoding_width(k);
}

struct ConvEntry {
  std::string name;  // tensor prefix; weights at name + ".w", bias + ".b"
  nn::ConvSpec spec;
};

struct DenseEntry {
  std::string name;
  int out = 0;
  int in = 0;
};

inline std::string level_prefix(const char* part, int k) {
  return std::string(part) + ".L" + std::to_string(k);
}

inline nn::ConvSpec conv3(int in, int out, int stride = 1) {
  return nn::ConvSpec{in, out, 3, stride};
}

// A ResBlock expands to conv0 (in->out), conv1 (out->out), skip (1x1).
inline void append_resblock(std::vector<ConvEntry>& v, const std::string& prefix,
                            int in, int out) {
  v.push_back({prefix + ".conv0", conv3(in, out)});
  v.push_back({prefix + ".conv1", conv3(out, out)});
  if (in != out) v.push_back({prefix + ".skip", nn::ConvSpec{in, out, 1, 1}});
}

inline std::vector<ConvEntry> band_encoder(int k) {
  const std::string p = level_prefix("enc", k);
  const int c = band_width(k);
  return {{p + ".conv0", conv3(3, c)}, {p + ".conv1", conv3(c, 2 * c)}};
}

inline std::vector<ConvEntry> band_generator(int k) {
  const std::string p = level_prefix("gen", k);
  const int c = band_width(k);
  return {{p + ".conv0", conv3(2 * c, c)}, {p + ".conv1", conv3(c, 3)}};
}

inline std::vector<ConvEntry> residual_encoder(int levels) {
  const std::string p = level_prefix("enc", levels);
  std::vector<ConvEntry> v{{p + ".conv0", conv3(3, 16)},
                           {p + ".conv1", conv3(16, 64)}};
  append_resblock(v, p + ".res0", 64, 128);
  append_resblock(v, p + ".res1", 128, kResidualEncodingWidth);
  v.push_back({p + ".conv2", conv3(kResidualEncodingWidth, kResidualEncodingWidth)});
  return v;
}

inline std::vector<ConvEntry> residual_generator(int levels) {
  const std::string p = level_prefix("gen", levels);
  std::vector<ConvEntry> v;
  append_resblock(v, p + ".res0", kResidualEncodingWidth, 128);
  append_resblock(v, p + ".res1", 128, 64);
  v.push_back({p + ".conv0", conv3(64, 16)});
  v.push_back({p + ".conv1", conv3(16, 3)});
  return v;
}

inline std::vector<DenseEntry> smn_encoder(int latent_dim) {
  return {{"smn.enc.fc0", kSmnEncoderHidden, kResidualEncodingWidth},
          {"smn.enc.fc1", 2 * latent_dim, kSmnEncoderHidden}};
}

inline std::vector<DenseEntry> smn_decoder_trunk(int latent_dim) {
  return {{"smn.dec.fc0", kSmnDecoderHidden0, latent_dim},
          {"smn.dec.fc1", kSmnDecoderHidden1, kSmnDecoderHidden0}};
}

/// One head per pathway, k = 0..K; each emits (alpha, beta_raw).
inline std::vector<DenseEntry> smn_heads(int levels) {
  std::vector<DenseEntry> v;
  for (int k = 0; k <= levels; ++k) {
    v.push_back({"smn.dec.head" + std::to_string(k),
                 2 * pathway_width(k, levels), kSmnDecoderHidden1});
  }
  return v;
}

inline std::vector<ConvEntry> disc_stack(int k) {
  const std::string p = level_prefix("disc", k);
  std::vector<ConvEntry> v;
  int in = 3;
  for (int i = 0; i < 4; ++i) {
    v.push_back({p + ".conv" + std::to_string(i), conv3(in, kDiscChannels[i], 2)});
    in = kDiscChannels[i];
  }
  v.push_back({p + ".head", conv3(in, 1)});
  return v;
}

inline std::vector<ConvEntry> feature_stages(int stages) {
  std::vector<ConvEntry> v;
  int in = 3;
  for (int i = 0; i < stages; ++i) {
    v.push_back({"fe.stage" + std::to_string(i), conv3(in, kFeatureChannels[i], 2)});
    in = kFeatureChannels[i];
  }
  return v;
}

inline std::int64_t conv_macs(const nn::ConvSpec& s, int height, int width) {
  return static_cast<std::int64_t>(s.out_channels) * s.fan_in() *
         s.output_extent(height) * s.output_extent(width);
}

inline std::int64_t stack_macs(const std::vector<ConvEntry>& convs, int height,
                               int width) {
  std::int64_t total = 0;
  for (const auto& e : convs) total += conv_macs(e.spec, height, width);
  return total;
}

/// Analytic multiply-accumulate counts of one generator forward pass.
/// Only convolution and dense layers are counted.
struct GeneratorMacs {
  std::int64_t residual = 0;           // E_K + G_K
  std::vector<std::int64_t> bandpass;  // E_k + G_k per level (0 if skipped)
  std::int64_t style = 0;              // S_E + S_D

  std::int64_t total() const {
    std::int64_t t = residual + style;
    for (auto b : bandpass) t += b;
    return t;
  }
};

inline GeneratorMacs generator_macs(int height, int width, int levels,
                                    int out_level = 0,
                                    int latent_dim = kDefaultLatentDim) {
  GeneratorMacs m;
  int h = height;
  int w = width;
  for (int k = 0; k < levels; ++k) {
    std::int64_t band = 0;
    if (k >= out_level) {
      band = stack_macs(band_encoder(k), h, w) + stack_macs(band_generator(k), h, w);
    }
    m.bandpass.push_back(band);
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  m.residual = stack_macs(residual_encoder(levels), h, w) +
               stack_macs(residual_generator(levels), h, w);
  auto dense = [](const std::vector<DenseEntry>& v) {
    std::int64_t t = 0;
    for (const auto& e : v) t += static_cast<std::int64_t>(e.out) * e.in;
    return t;
  };
  m.style = dense(smn_encoder(latent_dim)) + dense(smn_decoder_trunk(latent_dim)) +
            dense(smn_heads(levels));
  return m;
}

}  // namespace lpstain::arch
