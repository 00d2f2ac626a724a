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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "lpstain/objective.hpp"
#include "lpstain/synthetic.hpp"
#include "test_support.hpp"

namespace lpstain {
namespace {

using testing::IdentityNetwork;
using testing::random_image;
using testing::random_tensor;

const ConvStainNetwork& net() {
  static const ConvStainNetwork n(init_random(ModelKind::kGenerator, 2, 8, 5));
  return n;
}
const Discriminator& disc() {
  static const Discriminator d(init_random(ModelKind::kDiscriminator, 2, 0, 6));
  return d;
}
const FeatureExtractor& fe(float slope = nn::kLeakySlope) {
  static const FeatureExtractor leaky(init_random(ModelKind::kFeatureExtractor, 4, 0, 7));
  static const FeatureExtractor linear(init_random(ModelKind::kFeatureExtractor, 4, 0, 7), 1.0f);
  return slope == 1.0f ? linear : leaky;
}

PyramidConfig<float> cfg(int levels) {
  PyramidConfig<float> c;
  c.levels = levels;
  return c;
}

TEST_CASE("identity and cross-cycle losses") {
  std::mt19937_64 rng(1);
  const auto lp = build_laplacian(random_image(32, 32, rng), cfg(2));
  const std::vector<double> ones(3, 1.0);
  CHECK(loss_identity(lp, lp, ones) == 0.0);
  CHECK(loss_cross_cycle(lp, lp, ones) == 0.0);

  auto shifted = lp;
  shifted.bandpass[0].matrix().array() += 0.5f;
  // Only Gaussian level 0 moves, by 0.5 everywhere.
  const std::vector<double> m{2.0, 1.0, 1.0};
  CHECK(loss_identity(lp, shifted, m) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(loss_cross_cycle(lp, shifted, m) == doctest::Approx(1.0).epsilon(1e-6));

  const auto other = build_laplacian(random_image(32, 32, rng), cfg(2));
  const double base = loss_identity(lp, other, ones);
  CHECK(loss_identity(lp, other, {2.0, 2.0, 2.0}) == doctest::Approx(2.0 * base));
  CHECK(loss_cross_cycle(lp, other, {2.0, 2.0, 2.0}) == doctest::Approx(2.0 * base));
  CHECK_THROWS_AS(loss_identity(lp, other, {1.0, 1.0}), Error);
}

TEST_CASE("KL to the standard normal") {
  StainVector s{Vectorf::Zero(8), Vectorf::Zero(8), Vectorf::Zero(8)};
  CHECK(loss_vae(s) == 0.0);
  s.mu(0) = 1.0f;
  CHECK(loss_vae(s) == doctest::Approx(0.5).epsilon(1e-12));
  s.logvar(3) = std::log(4.0f);
  CHECK(loss_vae(s) == doctest::Approx(0.5 + 0.5 * (4.0 - std::log(4.0) - 1.0)).epsilon(1e-6));
}

TEST_CASE("latent regression") {
  const Vectorf a = Vectorf::LinSpaced(8, -1.0f, 1.0f);
  Vectorf b = a;
  CHECK(loss_latent_regression(a, b) == 0.0);
  b(5) += 1.0f;
  CHECK(loss_latent_regression(a, b) == doctest::Approx(0.125).epsilon(1e-6));
  CHECK(loss_latent_regression(b, a) == loss_latent_regression(a, b));
}

TEST_CASE("mode seeking") {
  const Imagef i1(Tensorf::Constant(3, 8, 8, 0.0f), RangeTag::kSymmetric);
  const Imagef i2(Tensorf::Constant(3, 8, 8, 2.0f), RangeTag::kSymmetric);
  const Vectorf z1 = Vectorf::Zero(8), z2 = Vectorf::Ones(8);
  CHECK(loss_mode_seeking(z1, z2, i1, i2, 1e-8) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(loss_mode_seeking(z1, z1, i1, i2, 1e-8) == 0.0);
  const double big = loss_mode_seeking(z1, z2, i1, i1, 1e-8);
  CHECK(std::isfinite(big));
  CHECK(big == doctest::Approx(1e8));
}

TEST_CASE("least-squares adversarial loss") {
  const std::vector<Tensorf> ones{Tensorf::Constant(1, 4, 4, 1.0f)};
  const std::vector<Tensorf> zeros{Tensorf::Zero(1, 4, 4)};
  const std::vector<Tensorf> half{Tensorf::Constant(1, 4, 4, 0.5f)};
  CHECK(loss_adversarial(ones, zeros).discriminator == 0.0);
  CHECK(loss_adversarial(ones, zeros).generator == 1.0);
  CHECK(loss_adversarial(half, half).discriminator == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(loss_adversarial(half, half).generator == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(loss_adversarial(zeros, ones).generator == 0.0);
  CHECK_THROWS_AS(loss_adversarial(ones, {}), Error);
}

TEST_CASE("structure loss") {
  std::mt19937_64 rng(2);
  const Imagef a = to_symmetric(synthetic_tissue(32, 32, 3));
  CHECK(loss_structure(a, a, fe()) == 0.0);

  // Scalar gain plus per-channel offset; linear stages.
  Imagef b = a;
  const float offset[3] = {0.3f, -0.2f, 0.05f};
  for (int c = 0; c < 3; ++c) {
    b.pixels.matrix().row(c) = (1.7f * a.pixels.matrix().row(c).array() + offset[c]).matrix();
  }
  CHECK(loss_structure(a, b, fe(1.0f)) <= 1e-4);
  CHECK(loss_structure(b, a, fe(1.0f)) <= 1e-4);

  // Reverse the rows: same pixel set, different structure.
  Imagef flipped = a;
  for (int c = 0; c < 3; ++c) flipped.pixels.plane(c) = a.pixels.plane(c).colwise().reverse().eval();
  CHECK(loss_structure(a, flipped, fe()) > 0.0);
  CHECK_THROWS_AS(loss_structure(a, random_image(16, 16, rng), fe()), Error);
}

TEST_CASE("structure loss matches a direct oracle") {
  const WeightStore store = init_random(ModelKind::kFeatureExtractor, 2, 0, 8);
  const FeatureExtractor extractor(store);
  std::mt19937_64 rng(3);
  const Imagef a = random_image(16, 16, rng, RangeTag::kSymmetric);
  const Imagef b = random_image(16, 16, rng, RangeTag::kSymmetric);
  auto stage = [&](int i) { return store.conv("fe.stage" + std::to_string(i), {i == 0 ? 3 : 16, i == 0 ? 16 : 32, 3, 2}); };
  auto norm = [](const Tensorf& t) {
    std::vector<double> out(t.size());
    for (int c = 0; c < t.channels(); ++c) {
      double mean = 0, var = 0;
      for (Eigen::Index p = 0; p < t.pixels(); ++p) mean += t.matrix()(c, p);
      mean /= t.pixels();
      for (Eigen::Index p = 0; p < t.pixels(); ++p) var += std::pow(t.matrix()(c, p) - mean, 2);
      var /= t.pixels();
      for (Eigen::Index p = 0; p < t.pixels(); ++p) {
        out[c * t.pixels() + p] = (t.matrix()(c, p) - mean) / std::sqrt(var + 1e-5);
      }
    }
    return out;
  };
  double expect = 0.0;
  Tensorf fa = a.pixels, fb = b.pixels;
  for (int i = 0; i < 2; ++i) {
    fa = nn::leaky_relu(testing::naive_conv(fa, stage(i)));
    fb = nn::leaky_relu(testing::naive_conv(fb, stage(i)));
    const auto na = norm(fa), nb = norm(fb);
    double sq = 0.0;
    for (std::size_t j = 0; j < na.size(); ++j) sq += (na[j] - nb[j]) * (na[j] - nb[j]);
    expect += sq / static_cast<double>(na.size());
  }
  CHECK(loss_structure(a, b, extractor) == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("discriminator score maps") {
  const Imagef flat(Tensorf::Constant(3, 64, 48, 0.2f), RangeTag::kSymmetric);
  const auto scores = discriminate(build_laplacian(flat, cfg(2)), disc());
  REQUIRE(scores.size() == 3);
  const int h[] = {4, 2, 1}, w[] = {3, 2, 1};
  for (int k = 0; k < 3; ++k) {
    CHECK(scores[k].channels() == 1);
    CHECK(scores[k].height() == h[k]);
    CHECK(scores[k].width() == w[k]);
    CHECK(scores[k].all_finite());
  }
  CHECK_THROWS_AS(discriminate(build_laplacian(flat, cfg(3)), disc()), Error);
}

TEST_CASE("discriminator stack matches naive convolution") {
  const WeightStore store = init_random(ModelKind::kDiscriminator, 1, 0, 9);
  const Discriminator d(store);
  std::mt19937_64 rng(4);
  const Tensorf x = random_tensor(3, 16, 16, rng);
  Tensorf ref = x;
  int in = 3;
  for (int i = 0; i < 4; ++i) {
    const int out = 64 << i;
    ref = nn::leaky_relu(testing::naive_conv(ref, store.conv("disc.L0.conv" + std::to_string(i), {in, out, 3, 2})));
    in = out;
  }
  ref = testing::naive_conv(ref, store.conv("disc.L0.head", {in, 1, 3, 1}));
  CHECK(max_abs_diff(d.score_level(0, x), ref) <= 1e-4f);
}

TEST_CASE("objective weighting") {
  LossComponents unit{1, 1, 1, 1, 1, 1, 1};
  CHECK(combine_objective(unit, LossWeights{}) == 22.53);
  LossWeights zero{0, 0, 0, 0, 0, 0, {}, 1e-8};
  LossComponents c{0.3, 0.7, 2.0, 5.0, 1.5, 9.0, 0.125};
  CHECK(combine_objective(c, zero) == 0.125);
  LossWeights bad;
  bad.vae = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("identity rig reconstructs exactly in mode A") {
  const IdentityNetwork rig(3, {0.5f, 0.25f, 0.125f});
  std::mt19937_64 rng(5);
  const Imagef img = random_image(64, 64, rng, RangeTag::kSymmetric);
  const auto a = mode_a_pass(img, rig, 11);
  CHECK(a.loss_identity == 0.0);
  CHECK(a.loss_vae >= 0.0);
}

TEST_CASE("mode A and B passes are reproducible") {
  const Imagef img = to_symmetric(synthetic_tissue(32, 32, 9));
  const auto a1 = mode_a_pass(img, net(), 3), a2 = mode_a_pass(img, net(), 3);
  CHECK(a1.loss_identity == a2.loss_identity);
  CHECK(a1.loss_identity >= 0.0);
  CHECK(bit_identical(a1.reconstruction.pixels, a2.reconstruction.pixels));

  const LossWeights lw;
  const auto b1 = mode_b_pass(img, net(), disc(), fe(), lw, 3);
  const auto b2 = mode_b_pass(img, net(), disc(), fe(), lw, 3);
  CHECK(bit_identical(b1.augmented.pixels, b2.augmented.pixels));
  CHECK(bit_identical(b1.cyclic.pixels, b2.cyclic.pixels));
  CHECK(b1.total == b2.total);
  const LossComponents& c = b1.losses;
  for (double v : {c.identity, c.vae, c.cross_cycle, c.structure, c.latent_regression,
                   c.mode_seeking, c.adversarial, b1.discriminator_loss}) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
  }
  CHECK(b1.total == combine_objective(c, lw));
  LossWeights zero{0, 0, 0, 0, 0, 0, {}, 1e-8};
  CHECK(mode_b_pass(img, net(), disc(), fe(), zero, 3).total == c.adversarial);
}

}  // namespace
}  // namespace lpstain
