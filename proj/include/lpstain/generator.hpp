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
#include <random>
#include <vector>

#include "lpstain/image.hpp"
#include "lpstain/nn.hpp"
#include "lpstain/pyramid.hpp"
#include "lpstain/store.hpp"

namespace lpstain {

/// Latent stain code: Gaussian posterior (mu, logvar) and a drawn sample.
struct StainVector {
  Vectorf mu;
  Vectorf logvar;
  Vectorf sample;
};

/// One AdaIN parameter pair per pathway; index K is the residual pathway.
struct StainParamSet {
  std::vector<nn::AdaINParams<float>> pathways;

  const nn::AdaINParams<float>& residual() const { return pathways.back(); }
  const nn::AdaINParams<float>& band(int k) const { return pathways[k]; }
};

/// The learned mappings of the generator. The pyramid plumbing (band
/// scaling, pathway selection, reconstruction) lives in the free functions
/// below and is shared by every implementation.
class StainNetwork {
 public:
  virtual ~StainNetwork() = default;

  virtual int levels() const = 0;
  virtual int latent_dim() const = 0;
  virtual const BPScales<float>& bp_scales() const = 0;

  // E_K and E_k. `scaled_band` is already multiplied by rho_k.
  virtual Tensorf encode_residual(const Tensorf& residual) const = 0;
  virtual Tensorf encode_band(int k, const Tensorf& scaled_band) const = 0;

  // S_E on the raw residual encoding, S_D on a stain sample.
  virtual StainVector encode_stain(const Tensorf& residual_encoding) const = 0;
  virtual StainParamSet decode_stain(const Vectorf& sample) const = 0;

  // AdaIN followed by G_K / G_k. Band output is still divided by sigma_k.
  virtual Tensorf generate_residual(const Tensorf& encoding,
                                    const nn::AdaINParams<float>& p) const = 0;
  virtual Tensorf generate_band(int k, const Tensorf& encoding,
                                const nn::AdaINParams<float>& p) const = 0;
};

/// Convolutional generator loaded from a GSW1 generator store.
class ConvStainNetwork final : public StainNetwork {
 public:
  explicit ConvStainNetwork(const WeightStore& store);

  int levels() const override { return levels_; }
  int latent_dim() const override { return latent_dim_; }
  const BPScales<float>& bp_scales() const override { return scales_; }

  Tensorf encode_residual(const Tensorf& residual) const override;
  Tensorf encode_band(int k, const Tensorf& scaled_band) const override;
  StainVector encode_stain(const Tensorf& residual_encoding) const override;
  StainParamSet decode_stain(const Vectorf& sample) const override;
  Tensorf generate_residual(const Tensorf& encoding,
                            const nn::AdaINParams<float>& p) const override;
  Tensorf generate_band(int k, const Tensorf& encoding,
                        const nn::AdaINParams<float>& p) const override;

 private:
  struct BandPath {
    nn::ConvLayer<float> enc0, enc1, gen0, gen1;
  };

  int levels_ = 0;
  int latent_dim_ = 0;
  BPScales<float> scales_;
  std::vector<BandPath> bands_;
  nn::ConvLayer<float> res_enc0_, res_enc1_, res_enc2_;
  nn::ResBlockWeights<float> res_enc_block0_, res_enc_block1_;
  nn::ResBlockWeights<float> res_gen_block0_, res_gen_block1_;
  nn::ConvLayer<float> res_gen0_, res_gen1_;
  std::vector<nn::DenseLayer<float>> smn_encoder_;
  std::vector<nn::DenseLayer<float>> smn_trunk_;
  std::vector<nn::DenseLayer<float>> smn_heads_;
};

/// Everything the encoder side produces for one input pyramid.
struct PyramidEncoding {
  LaplacianPyramid<float> pyramid;
  Tensorf residual_encoding;            // z_K
  std::vector<Tensorf> band_encodings;  // E_k(rho_k h_k); empty below `lowest`
  StainVector stain;                    // sample = mu
  int lowest_level = 0;
};

PyramidConfig<float> generator_pyramid(const StainNetwork& net);

/// Encodes an image in the symmetric range. Band pathways below
/// `lowest_level` are not evaluated.
PyramidEncoding encode(const Imagef& img, const StainNetwork& net,
                       int lowest_level = 0);
PyramidEncoding encode_pyramid(LaplacianPyramid<float> lp,
                               const StainNetwork& net, int lowest_level = 0);

StainParamSet style_decode(const Vectorf& stain_sample, const StainNetwork& net);

/// Output pyramid for levels >= out_level:
///   I_K^out = G_K(AdaIN(z_K)),  h_k^out = sigma_k * G_k(AdaIN(E_k(rho_k h_k))).
LaplacianPyramid<float> synthesize(const PyramidEncoding& enc,
                                   const StainParamSet& params,
                                   const StainNetwork& net, int out_level);

struct TransferResult {
  Imagef image;                     // I_{out_level}, symmetric range
  LaplacianPyramid<float> pyramid;  // bands below out_level are empty
  int out_level = 0;
};

TransferResult transfer_detailed(const Imagef& img, const Vectorf& stain_sample,
                                 const StainNetwork& net, int out_level);
Imagef transfer(const Imagef& img, const Vectorf& stain_sample,
                const StainNetwork& net, int out_level = 0);

struct Augmentation {
  Imagef image;
  Vectorf stain;
};

/// Draws z ~ N(0, I) from a generator seeded with `seed`, then transfers.
Augmentation augment_random(const Imagef& img, std::uint64_t seed,
                            const StainNetwork& net, int out_level = 0);

/// Stain code of an image; reads only the residual pathway.
StainVector extract_stain(const Imagef& img, const StainNetwork& net);

Vectorf interpolate_stain(const Vectorf& a, const Vectorf& b, float t);

Vectorf sample_standard_normal(int n, std::mt19937_64& rng);

}  // namespace lpstain
