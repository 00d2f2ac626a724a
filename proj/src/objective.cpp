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

#include "lpstain/objective.hpp"

#include <cmath>
#include <string>

#include "lpstain/architecture.hpp"

namespace lpstain {
namespace {

double mean_abs_diff(const Tensorf& a, const Tensorf& b) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::kShapeMismatch, a.shape_string() + " vs " + b.shape_string());
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    sum += std::abs(static_cast<double>(a.data()[i]) - b.data()[i]);
  }
  return a.size() ? sum / static_cast<double>(a.size()) : 0.0;
}

double mean_abs_diff(const Vectorf& a, const Vectorf& b) {
  if (a.size() != b.size()) fail(ErrorCode::kShapeMismatch, "vector lengths differ");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    sum += std::abs(static_cast<double>(a(i)) - b(i));
  }
  return a.size() ? sum / static_cast<double>(a.size()) : 0.0;
}

double pyramid_l1(const LaplacianPyramid<float>& a, const LaplacianPyramid<float>& b,
                  const std::vector<double>& m) {
  if (a.levels() != b.levels()) {
    fail(ErrorCode::kShapeMismatch, "pyramids differ in depth");
  }
  if (m.size() != static_cast<std::size_t>(a.levels() + 1)) {
    fail(ErrorCode::kShapeMismatch, "need K+1 level weights");
  }
  PyramidConfig<float> cfg;
  cfg.levels = a.levels();
  const auto ga = gaussian_levels(a, cfg);
  const auto gb = gaussian_levels(b, cfg);
  double total = 0.0;
  for (std::size_t k = 0; k < ga.size(); ++k) total += m[k] * mean_abs_diff(ga[k], gb[k]);
  return total;
}

std::vector<double> weights_or_ones(const std::vector<double>& m, int levels) {
  return m.empty() ? std::vector<double>(levels + 1, 1.0) : m;
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {identity, vae, cross_cycle, structure, latent_regression, mode_seeking}) {
    if (!(v >= 0.0)) fail(ErrorCode::kRangeError, "loss weights must be >= 0");
  }
  for (double v : level_weights) {
    if (!(v >= 0.0)) fail(ErrorCode::kRangeError, "level weights must be >= 0");
  }
  if (!(mode_seeking_eps > 0.0)) fail(ErrorCode::kRangeError, "eps_ms must be > 0");
}

std::vector<double> LossWeights::levels_for(int pyramid_levels) const {
  return weights_or_ones(level_weights, pyramid_levels);
}

double combine_objective(const LossComponents& c, const LossWeights& w) {
  const double terms[] = {c.adversarial,
                          w.identity * c.identity,
                          w.vae * c.vae,
                          w.cross_cycle * c.cross_cycle,
                          w.structure * c.structure,
                          w.latent_regression * c.latent_regression,
                          w.mode_seeking * c.mode_seeking};
  // Neumaier summation: the result is the rounded exact sum for these few
  // terms, independent of their order.
  double sum = 0.0, comp = 0.0;
  for (double t : terms) {
    const double next = sum + t;
    comp += std::abs(sum) >= std::abs(t) ? (sum - next) + t : (t - next) + sum;
    sum = next;
  }
  return sum + comp;
}

double loss_identity(const LaplacianPyramid<float>& lp_in,
                     const LaplacianPyramid<float>& lp_rec,
                     const std::vector<double>& level_weights) {
  return pyramid_l1(lp_in, lp_rec, level_weights);
}

double loss_cross_cycle(const LaplacianPyramid<float>& lp_in,
                        const LaplacianPyramid<float>& lp_cyc,
                        const std::vector<double>& level_weights) {
  return pyramid_l1(lp_in, lp_cyc, level_weights);
}

double loss_vae(const StainVector& stain) {
  if (stain.mu.size() != stain.logvar.size()) {
    fail(ErrorCode::kShapeMismatch, "mu and logvar differ in length");
  }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < stain.mu.size(); ++i) {
    const double mu = stain.mu(i);
    const double lv = stain.logvar(i);
    kl += mu * mu + std::exp(lv) - lv - 1.0;
  }
  return 0.5 * kl;
}

double loss_latent_regression(const Vectorf& z_r, const Vectorf& z_out) {
  return mean_abs_diff(z_r, z_out);
}

double loss_mode_seeking(const Vectorf& z_r1, const Vectorf& z_r2, const Imagef& img_r1,
                         const Imagef& img_r2, double eps) {
  return mean_abs_diff(z_r1, z_r2) / (mean_abs_diff(img_r1.pixels, img_r2.pixels) + eps);
}

FeatureExtractor::FeatureExtractor(const WeightStore& store, float slope) : slope_(slope) {
  if (store.kind != ModelKind::kFeatureExtractor) {
    fail(ErrorCode::kWeightShapeMismatch, "expected a feature-extractor store");
  }
  for (const auto& e : arch::feature_stages(store.levels)) {
    stages_.push_back(store.conv(e.name, e.spec));
  }
}

std::vector<Tensorf> FeatureExtractor::features(const Tensorf& image) const {
  std::vector<Tensorf> out;
  const Tensorf* cur = &image;
  for (const auto& stage : stages_) {
    out.push_back(nn::leaky_relu(nn::conv2d(*cur, stage), slope_));
    cur = &out.back();
  }
  return out;
}

double loss_structure(const Imagef& img_in, const Imagef& img_out,
                      const FeatureExtractor& fe) {
  if (!img_in.pixels.same_shape(img_out.pixels)) {
    fail(ErrorCode::kShapeMismatch, "structure loss needs equal image dims");
  }
  const auto fa = fe.features(img_in.pixels);
  const auto fb = fe.features(img_out.pixels);
  double total = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    const Tensorf a = nn::instance_norm(fa[i]);
    const Tensorf b = nn::instance_norm(fb[i]);
    double sq = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      const double d = static_cast<double>(a.data()[j]) - b.data()[j];
      sq += d * d;
    }
    total += sq / static_cast<double>(a.size());
  }
  return total;
}

Discriminator::Discriminator(const WeightStore& store) {
  if (store.kind != ModelKind::kDiscriminator) {
    fail(ErrorCode::kWeightShapeMismatch, "expected a discriminator store");
  }
  for (int k = 0; k <= store.levels; ++k) {
    const auto entries = arch::disc_stack(k);
    Stack s;
    for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
      s.convs.push_back(store.conv(entries[i].name, entries[i].spec));
    }
    s.head = store.conv(entries.back().name, entries.back().spec);
    stacks_.push_back(std::move(s));
  }
}

Tensorf Discriminator::score_level(int k, const Tensorf& image) const {
  const Stack& s = stacks_.at(k);
  Tensorf x = image;
  for (const auto& conv : s.convs) x = nn::leaky_relu(nn::conv2d(x, conv));
  return nn::conv2d(x, s.head);
}

std::vector<Tensorf> discriminate(const LaplacianPyramid<float>& lp,
                                  const Discriminator& disc) {
  if (lp.levels() != disc.levels()) {
    fail(ErrorCode::kShapeMismatch, "discriminator has " + std::to_string(disc.levels() + 1) +
                                        " stacks for a " +
                                        std::to_string(lp.levels() + 1) + "-level pyramid");
  }
  PyramidConfig<float> cfg;
  cfg.levels = lp.levels();
  const auto levels = gaussian_levels(lp, cfg);
  std::vector<Tensorf> scores;
  for (int k = 0; k <= lp.levels(); ++k) scores.push_back(disc.score_level(k, levels[k]));
  return scores;
}

AdversarialLoss loss_adversarial(const std::vector<Tensorf>& real_scores,
                                 const std::vector<Tensorf>& fake_scores) {
  if (real_scores.size() != fake_scores.size()) {
    fail(ErrorCode::kShapeMismatch, "real/fake score level counts differ");
  }
  AdversarialLoss loss;
  for (std::size_t k = 0; k < real_scores.size(); ++k) {
    const auto& real = real_scores[k].matrix();
    const auto& fake = fake_scores[k].matrix();
    double fake_sq = 0.0, real_gap = 0.0, fake_gap = 0.0;
    for (Eigen::Index i = 0; i < fake.size(); ++i) {
      const double f = fake.data()[i];
      fake_sq += f * f;
      fake_gap += (1.0 - f) * (1.0 - f);
    }
    for (Eigen::Index i = 0; i < real.size(); ++i) {
      const double r = real.data()[i];
      real_gap += (1.0 - r) * (1.0 - r);
    }
    const double nf = static_cast<double>(std::max<Eigen::Index>(fake.size(), 1));
    const double nr = static_cast<double>(std::max<Eigen::Index>(real.size(), 1));
    loss.discriminator += 0.5 * fake_sq / nf + 0.5 * real_gap / nr;
    loss.generator += fake_gap / nf;
  }
  return loss;
}

ModeAResult mode_a_pass(const Imagef& img, const StainNetwork& net, std::uint64_t seed,
                        const std::vector<double>& level_weights) {
  const PyramidEncoding enc = encode(img, net);
  std::mt19937_64 rng(seed);
  const Vectorf noise = sample_standard_normal(net.latent_dim(), rng);

  ModeAResult r;
  r.stain = enc.stain;
  r.stain.sample =
      (enc.stain.mu.array() + (enc.stain.logvar.array() * 0.5f).exp() * noise.array())
          .matrix();
  r.pyramid = synthesize(enc, net.decode_stain(r.stain.sample), net, 0);
  r.reconstruction = reconstruct(r.pyramid, generator_pyramid(net));
  r.loss_identity =
      loss_identity(enc.pyramid, r.pyramid, weights_or_ones(level_weights, net.levels()));
  r.loss_vae = loss_vae(enc.stain);
  return r;
}

ModeBResult mode_b_pass(const Imagef& img, const StainNetwork& net,
                        const Discriminator& disc, const FeatureExtractor& fe,
                        const LossWeights& weights, std::uint64_t seed) {
  weights.validate();
  const auto m = weights.levels_for(net.levels());
  const auto cfg = generator_pyramid(net);

  const ModeAResult mode_a = mode_a_pass(img, net, seed, m);

  // Separate stream from Mode A's reparameterization noise.
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
  ModeBResult r;
  r.z_r1 = sample_standard_normal(net.latent_dim(), rng);
  r.z_r2 = sample_standard_normal(net.latent_dim(), rng);

  const PyramidEncoding enc_in = encode(img, net);
  const LaplacianPyramid<float> out1 = synthesize(enc_in, net.decode_stain(r.z_r1), net, 0);
  const LaplacianPyramid<float> out2 = synthesize(enc_in, net.decode_stain(r.z_r2), net, 0);
  r.augmented = reconstruct(out1, cfg);
  const Imagef augmented2 = reconstruct(out2, cfg);

  // Reverse direction: re-encode the augmented pyramid, restore the input stain.
  const PyramidEncoding enc_out = encode_pyramid(out1, net);
  const LaplacianPyramid<float> cyclic =
      synthesize(enc_out, net.decode_stain(enc_in.stain.mu), net, 0);
  r.cyclic = reconstruct(cyclic, cfg);

  LossComponents& c = r.losses;
  c.identity = mode_a.loss_identity;
  c.vae = mode_a.loss_vae;
  c.cross_cycle = loss_cross_cycle(enc_in.pyramid, cyclic, m);
  c.structure = loss_structure(img, r.augmented, fe);
  c.latent_regression = loss_latent_regression(r.z_r1, enc_out.stain.mu);
  c.mode_seeking = loss_mode_seeking(r.z_r1, r.z_r2, r.augmented, augmented2,
                                     weights.mode_seeking_eps);
  const AdversarialLoss adv =
      loss_adversarial(discriminate(enc_in.pyramid, disc), discriminate(out1, disc));
  c.adversarial = adv.generator;
  r.discriminator_loss = adv.discriminator;
  r.total = combine_objective(c, weights);
  return r;
}

}  // namespace lpstain
