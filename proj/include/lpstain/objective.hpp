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
#include <vector>

#include "lpstain/generator.hpp"
#include "lpstain/pyramid.hpp"
#include "lpstain/store.hpp"

namespace lpstain {

/// Weights of the combined objective. `level_weights` holds m_0..m_K; an
/// empty vector means 1 for every level.
struct LossWeights {
  double identity = 1.0;
  double vae = 0.01;
  double cross_cycle = 10.0;
  double structure = 0.5;
  double latent_regression = 10.0;
  double mode_seeking = 0.02;
  std::vector<double> level_weights;
  double mode_seeking_eps = 1e-8;

  void validate() const;
  std::vector<double> levels_for(int pyramid_levels) const;
};

struct LossComponents {
  double identity = 0.0;
  double vae = 0.0;
  double cross_cycle = 0.0;
  double structure = 0.0;
  double latent_regression = 0.0;
  double mode_seeking = 0.0;
  double adversarial = 0.0;  // generator-side least-squares term
};

/// adversarial + sum of lambda-weighted components.
double combine_objective(const LossComponents& c, const LossWeights& w);

/// sum_k m_k * mean|I_k^in - I_k^rec| over the Gaussian levels k = 0..K
/// implied by the two pyramids.
double loss_identity(const LaplacianPyramid<float>& lp_in,
                     const LaplacianPyramid<float>& lp_rec,
                     const std::vector<double>& level_weights);
double loss_cross_cycle(const LaplacianPyramid<float>& lp_in,
                        const LaplacianPyramid<float>& lp_cyc,
                        const std::vector<double>& level_weights);

/// KL(N(mu, exp(logvar)) || N(0, I)) in closed form.
double loss_vae(const StainVector& stain);

double loss_latent_regression(const Vectorf& z_r, const Vectorf& z_out);

/// mean|z1 - z2| / (mean|I1 - I2| + eps).
double loss_mode_seeking(const Vectorf& z_r1, const Vectorf& z_r2,
                         const Imagef& img_r1, const Imagef& img_r2, double eps);

/// Fixed convolutional feature stack phi_1..phi_N for the structure loss.
/// A slope of 1 makes every stage linear.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const WeightStore& store, float slope = nn::kLeakySlope);

  int stages() const { return static_cast<int>(stages_.size()); }
  /// Outputs of every stage, phi_1(x) .. phi_N(x).
  std::vector<Tensorf> features(const Tensorf& image) const;

 private:
  std::vector<nn::ConvLayer<float>> stages_;
  float slope_;
};

/// sum_i ||IN(phi_i(in)) - IN(phi_i(out))||_F^2 / (w_i h_i d_i).
double loss_structure(const Imagef& img_in, const Imagef& img_out,
                      const FeatureExtractor& fe);

/// One identical patch discriminator per pyramid level.
class Discriminator {
 public:
  explicit Discriminator(const WeightStore& store);

  int levels() const { return static_cast<int>(stacks_.size()) - 1; }
  Tensorf score_level(int k, const Tensorf& image) const;

 private:
  struct Stack {
    std::vector<nn::ConvLayer<float>> convs;
    nn::ConvLayer<float> head;
  };
  std::vector<Stack> stacks_;
};

/// Patch score maps D_k(I_k) for every Gaussian level of the pyramid.
std::vector<Tensorf> discriminate(const LaplacianPyramid<float>& lp,
                                  const Discriminator& disc);

struct AdversarialLoss {
  double discriminator = 0.0;
  double generator = 0.0;
};

/// Least squares:
///   d = 1/2 sum_k mean D_k(fake)^2 + 1/2 sum_k mean (1 - D_k(real))^2
///   g = sum_k mean (1 - D_k(fake))^2
AdversarialLoss loss_adversarial(const std::vector<Tensorf>& real_scores,
                                 const std::vector<Tensorf>& fake_scores);

struct ModeAResult {
  Imagef reconstruction;
  LaplacianPyramid<float> pyramid;
  StainVector stain;  // sample holds the reparameterized draw
  double loss_identity = 0.0;
  double loss_vae = 0.0;
};

/// Identity reconstruction: encode, resample the own stain with
/// mu + exp(logvar/2) * n, decode, and score.
ModeAResult mode_a_pass(const Imagef& img, const StainNetwork& net,
                        std::uint64_t seed,
                        const std::vector<double>& level_weights = {});

struct ModeBResult {
  Imagef augmented;  // I^out from z_r1
  Imagef cyclic;     // reverse decode with the input stain
  Vectorf z_r1;
  Vectorf z_r2;
  LossComponents losses;
  double discriminator_loss = 0.0;
  double total = 0.0;
};

/// Cyclic reconstruction pass; also runs Mode A so all seven losses and
/// the combined objective are available from one call.
ModeBResult mode_b_pass(const Imagef& img, const StainNetwork& net,
                        const Discriminator& disc, const FeatureExtractor& fe,
                        const LossWeights& weights, std::uint64_t seed);

}  // namespace lpstain
