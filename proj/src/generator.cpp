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

#include "lpstain/generator.hpp"

#include <string>

#include "lpstain/architecture.hpp"

namespace lpstain {
namespace {

nn::ConvLayer<float> load_conv(const WeightStore& store, const arch::ConvEntry& e) {
  return store.conv(e.name, e.spec);
}

std::vector<nn::DenseLayer<float>> load_dense(const WeightStore& store,
                                              const std::vector<arch::DenseEntry>& entries) {
  std::vector<nn::DenseLayer<float>> layers;
  for (const auto& e : entries) layers.push_back(store.dense(e.name, e.out, e.in));
  return layers;
}

// Consumes conv0, conv1 and the optional skip of one ResBlock from `it`.
nn::ResBlockWeights<float> load_resblock(const WeightStore& store,
                                         std::vector<arch::ConvEntry>::const_iterator& it) {
  nn::ResBlockWeights<float> block;
  block.conv0 = load_conv(store, *it++);
  block.conv1 = load_conv(store, *it++);
  if (block.conv0.spec.in_channels != block.conv1.spec.out_channels) {
    block.skip = load_conv(store, *it++);
  }
  return block;
}

void check_level(int out_level, int levels) {
  if (out_level < 0 || out_level >= levels) {
    fail(ErrorCode::kLevelOutOfRange, "out_level " + std::to_string(out_level) +
                                          " outside [0, " + std::to_string(levels - 1) +
                                          "]");
  }
}

}  // namespace

ConvStainNetwork::ConvStainNetwork(const WeightStore& store) {
  if (store.kind != ModelKind::kGenerator) {
    fail(ErrorCode::kWeightShapeMismatch,
         "expected a generator store, got " + std::string(model_kind_name(store.kind)));
  }
  if (store.levels < 1 || store.latent_dim < 1) {
    fail(ErrorCode::kWeightShapeMismatch, "generator store needs K >= 1 and d_s >= 1");
  }
  levels_ = store.levels;
  latent_dim_ = store.latent_dim;

  const auto& sigma = store.at("bp.sigma");
  if (sigma.values.size() != static_cast<std::size_t>(levels_)) {
    fail(ErrorCode::kWeightShapeMismatch, "bp.sigma must hold K values");
  }
  scales_ = BPScales<float>::from_sigma(sigma.values);

  for (int k = 0; k < levels_; ++k) {
    const auto enc = arch::band_encoder(k);
    const auto gen = arch::band_generator(k);
    bands_.push_back({load_conv(store, enc[0]), load_conv(store, enc[1]),
                      load_conv(store, gen[0]), load_conv(store, gen[1])});
  }

  const auto enc = arch::residual_encoder(levels_);
  auto it = enc.cbegin();
  res_enc0_ = load_conv(store, *it++);
  res_enc1_ = load_conv(store, *it++);
  res_enc_block0_ = load_resblock(store, it);
  res_enc_block1_ = load_resblock(store, it);
  res_enc2_ = load_conv(store, *it++);

  const auto gen = arch::residual_generator(levels_);
  it = gen.cbegin();
  res_gen_block0_ = load_resblock(store, it);
  res_gen_block1_ = load_resblock(store, it);
  res_gen0_ = load_conv(store, *it++);
  res_gen1_ = load_conv(store, *it++);

  smn_encoder_ = load_dense(store, arch::smn_encoder(latent_dim_));
  smn_trunk_ = load_dense(store, arch::smn_decoder_trunk(latent_dim_));
  smn_heads_ = load_dense(store, arch::smn_heads(levels_));
}

Tensorf ConvStainNetwork::encode_residual(const Tensorf& residual) const {
  Tensorf x = nn::leaky_relu(nn::conv2d(residual, res_enc0_));
  x = nn::leaky_relu(nn::conv2d(x, res_enc1_));
  x = nn::resblock(x, res_enc_block0_);
  x = nn::resblock(x, res_enc_block1_);
  return nn::conv2d(x, res_enc2_);
}

Tensorf ConvStainNetwork::encode_band(int k, const Tensorf& scaled_band) const {
  const BandPath& p = bands_.at(k);
  return nn::conv2d(nn::leaky_relu(nn::conv2d(scaled_band, p.enc0)), p.enc1);
}

StainVector ConvStainNetwork::encode_stain(const Tensorf& residual_encoding) const {
  const Vectorf out = nn::mlp<float>(nn::global_avg_pool(residual_encoding), smn_encoder_);
  StainVector s;
  s.mu = out.head(latent_dim_);
  s.logvar = out.tail(latent_dim_);
  s.sample = s.mu;
  return s;
}

StainParamSet ConvStainNetwork::decode_stain(const Vectorf& sample) const {
  if (sample.size() != latent_dim_) {
    fail(ErrorCode::kShapeMismatch, "stain sample has " + std::to_string(sample.size()) +
                                        " entries, d_s = " + std::to_string(latent_dim_));
  }
  const Vectorf trunk = nn::leaky_relu<float>(nn::mlp<float>(sample, smn_trunk_));
  StainParamSet set;
  for (const auto& head : smn_heads_) {
    const Vectorf raw = head.weights * trunk + head.bias;
    const Eigen::Index width = raw.size() / 2;
    nn::AdaINParams<float> p;
    p.alpha = raw.head(width);
    p.beta = raw.tail(width).unaryExpr(
        [](float v) { return nn::softplus(v) + nn::kNormEps; });
    set.pathways.push_back(std::move(p));
  }
  return set;
}

Tensorf ConvStainNetwork::generate_residual(const Tensorf& encoding,
                                            const nn::AdaINParams<float>& p) const {
  Tensorf x = nn::leaky_relu(nn::adain(encoding, p));
  x = nn::resblock(x, res_gen_block0_);
  x = nn::resblock(x, res_gen_block1_);
  x = nn::leaky_relu(nn::conv2d(x, res_gen0_));
  return nn::conv2d(x, res_gen1_);
}

Tensorf ConvStainNetwork::generate_band(int k, const Tensorf& encoding,
                                        const nn::AdaINParams<float>& p) const {
  const BandPath& path = bands_.at(k);
  Tensorf x = nn::conv2d(nn::leaky_relu(nn::adain(encoding, p)), path.gen0);
  return nn::conv2d(nn::leaky_relu(x), path.gen1);
}

PyramidConfig<float> generator_pyramid(const StainNetwork& net) {
  PyramidConfig<float> cfg;
  cfg.levels = net.levels();
  return cfg;
}

PyramidEncoding encode_pyramid(LaplacianPyramid<float> lp, const StainNetwork& net,
                               int lowest_level) {
  if (lp.levels() != net.levels()) {
    fail(ErrorCode::kShapeMismatch, "pyramid has " + std::to_string(lp.levels()) +
                                        " levels, network expects " +
                                        std::to_string(net.levels()));
  }
  PyramidEncoding enc;
  enc.lowest_level = lowest_level;
  enc.residual_encoding = net.encode_residual(lp.residual);
  enc.stain = net.encode_stain(enc.residual_encoding);
  enc.band_encodings.resize(net.levels());
  const auto& scales = net.bp_scales();
  for (int k = lowest_level; k < net.levels(); ++k) {
    enc.band_encodings[k] = net.encode_band(k, scales.rho[k] * lp.bandpass[k]);
  }
  enc.pyramid = std::move(lp);
  return enc;
}

PyramidEncoding encode(const Imagef& img, const StainNetwork& net, int lowest_level) {
  if (img.range != RangeTag::kSymmetric) {
    fail(ErrorCode::kRangeError, "generator input must be in the symmetric range");
  }
  return encode_pyramid(build_laplacian(img, generator_pyramid(net)), net, lowest_level);
}

StainParamSet style_decode(const Vectorf& stain_sample, const StainNetwork& net) {
  return net.decode_stain(stain_sample);
}

LaplacianPyramid<float> synthesize(const PyramidEncoding& enc,
                                   const StainParamSet& params,
                                   const StainNetwork& net, int out_level) {
  if (out_level < enc.lowest_level) {
    fail(ErrorCode::kLevelOutOfRange, "band encodings below level " +
                                          std::to_string(enc.lowest_level) +
                                          " were not computed");
  }
  LaplacianPyramid<float> out;
  out.range = enc.pyramid.range;
  out.bandpass.resize(net.levels());
  out.residual = net.generate_residual(enc.residual_encoding, params.residual());
  const auto& scales = net.bp_scales();
  for (int k = out_level; k < net.levels(); ++k) {
    out.bandpass[k] =
        scales.sigma[k] * net.generate_band(k, enc.band_encodings[k], params.band(k));
  }
  return out;
}

TransferResult transfer_detailed(const Imagef& img, const Vectorf& stain_sample,
                                 const StainNetwork& net, int out_level) {
  check_level(out_level, net.levels());
  const PyramidEncoding enc = encode(img, net, out_level);
  TransferResult r;
  r.out_level = out_level;
  r.pyramid = synthesize(enc, style_decode(stain_sample, net), net, out_level);
  r.image = Imagef(reconstruct_at_level(r.pyramid, out_level, generator_pyramid(net)),
                   RangeTag::kSymmetric);
  return r;
}

Imagef transfer(const Imagef& img, const Vectorf& stain_sample,
                const StainNetwork& net, int out_level) {
  return transfer_detailed(img, stain_sample, net, out_level).image;
}

Vectorf sample_standard_normal(int n, std::mt19937_64& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  Vectorf v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Augmentation augment_random(const Imagef& img, std::uint64_t seed,
                            const StainNetwork& net, int out_level) {
  std::mt19937_64 rng(seed);
  Augmentation a;
  a.stain = sample_standard_normal(net.latent_dim(), rng);
  a.image = transfer(img, a.stain, net, out_level);
  return a;
}

StainVector extract_stain(const Imagef& img, const StainNetwork& net) {
  if (img.range != RangeTag::kSymmetric) {
    fail(ErrorCode::kRangeError, "generator input must be in the symmetric range");
  }
  const auto lp = build_laplacian(img, generator_pyramid(net));
  return net.encode_stain(net.encode_residual(lp.residual));
}

Vectorf interpolate_stain(const Vectorf& a, const Vectorf& b, float t) {
  if (a.size() != b.size()) {
    fail(ErrorCode::kShapeMismatch, "stain vectors differ in length");
  }
  if (!(t >= 0.0f && t <= 1.0f)) {
    fail(ErrorCode::kRangeError, "t = " + std::to_string(t) + " outside [0, 1]");
  }
  return (1.0f - t) * a + t * b;
}

}  // namespace lpstain
