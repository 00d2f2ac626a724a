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

#include "lpstain/pyramid.hpp"
#include "lpstain/synthetic.hpp"
#include "test_support.hpp"

namespace lpstain {
namespace {

using testing::random_image;

constexpr double kTaps[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};

int mirror(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * (n - 1) - i;
  return i;
}

// Dense 5x5 blur straight from the outer product of the taps.
Tensorf dense_blur(const Tensorf& src) {
  Tensorf out(src.channels(), src.height(), src.width());
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x) {
        double acc = 0.0;
        for (int dy = -2; dy <= 2; ++dy)
          for (int dx = -2; dx <= 2; ++dx)
            acc += kTaps[dy + 2] * kTaps[dx + 2] *
                   src(c, mirror(y + dy, src.height()), mirror(x + dx, src.width()));
        out(c, y, x) = static_cast<float>(acc);
      }
  return out;
}

// Zero insertion followed by a dense 5x5 filter with gain 4.
Tensorf dense_upsample(const Tensorf& src, int h, int w) {
  Tensorf z = Tensorf::Zero(src.channels(), h, w);
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x) z(c, 2 * y, 2 * x) = src(c, y, x);
  Tensorf out = dense_blur(z);
  return 4.0f * out;
}

TEST_CASE("kernel taps are normalized and symmetric") {
  PyramidConfig<float> cfg;
  float sum = 0.0f;
  for (float t : cfg.taps) sum += t;
  CHECK(std::abs(sum - 1.0f) <= 1e-7f);
  for (std::size_t i = 0; i < cfg.taps.size(); ++i) {
    CHECK(cfg.taps[i] == cfg.taps[cfg.taps.size() - 1 - i]);
  }
  cfg.levels = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("gaussian pyramid of a constant image stays constant") {
  PyramidConfig<float> cfg;
  const Imagef img(Tensorf::Constant(3, 40, 24, 0.37f), RangeTag::kUnit);
  const auto gp = build_gaussian(img, cfg);
  REQUIRE(gp.levels.size() == 4);
  for (const auto& level : gp.levels) {
    CHECK(level.matrix().maxCoeff() == doctest::Approx(0.37f).epsilon(1e-6));
    CHECK(level.matrix().minCoeff() == doctest::Approx(0.37f).epsilon(1e-6));
  }
}

TEST_CASE("512 input with K=3 yields 512/256/128/64") {
  PyramidConfig<float> cfg;
  std::mt19937_64 rng(1);
  const auto gp = build_gaussian(random_image(512, 512, rng), cfg);
  const int expect[] = {512, 256, 128, 64};
  for (int k = 0; k < 4; ++k) {
    CHECK(gp.levels[k].height() == expect[k]);
    CHECK(gp.levels[k].width() == expect[k]);
  }
}

TEST_CASE("odd dimensions halve with ceil") {
  PyramidConfig<float> cfg;
  std::mt19937_64 rng(2);
  const auto gp = build_gaussian(random_image(37, 21, rng), cfg);
  CHECK(gp.levels[1].height() == 19);
  CHECK(gp.levels[1].width() == 11);
  CHECK(gp.levels[3].height() == 5);
  CHECK(gp.levels[3].width() == 3);
}

TEST_CASE("ramp level 1 matches dense convolution oracle") {
  PyramidConfig<float> cfg;
  cfg.levels = 1;
  Tensorf ramp(3, 8, 8);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) ramp(c, y, x) = x / 7.0f;
  const auto gp = build_gaussian(Imagef(ramp, RangeTag::kUnit), cfg);
  const Tensorf blurred = dense_blur(ramp);
  REQUIRE(gp.levels[1].height() == 4);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) CHECK(gp.levels[1](c, y, x) == doctest::Approx(blurred(c, 2 * y, 2 * x)).epsilon(1e-6));
}

TEST_CASE("h_0 matches gaussian level minus oracle upsample") {
  PyramidConfig<float> cfg;
  cfg.levels = 2;
  std::mt19937_64 rng(3);
  const Imagef img = random_image(64, 64, rng);
  const auto gp = build_gaussian(img, cfg);
  const auto lp = build_laplacian(img, cfg);
  const Tensorf expect = gp.levels[0] - dense_upsample(gp.levels[1], 64, 64);
  CHECK(max_abs_diff(lp.bandpass[0], expect) <= 1e-6f);
}

TEST_CASE("constant image has zero bands") {
  PyramidConfig<float> cfg;
  const Imagef img(Tensorf::Constant(3, 32, 32, 0.6f), RangeTag::kUnit);
  const auto lp = build_laplacian(img, cfg);
  for (const auto& b : lp.bandpass) CHECK(b.matrix().cwiseAbs().maxCoeff() <= 1e-7f);
  CHECK(lp.residual.matrix().minCoeff() == doctest::Approx(0.6f));
}

TEST_CASE("256 with K=3 gives bands 256/128/64 and residual 32") {
  PyramidConfig<float> cfg;
  std::mt19937_64 rng(4);
  const auto lp = build_laplacian(random_image(256, 256, rng), cfg);
  CHECK(lp.bandpass[0].height() == 256);
  CHECK(lp.bandpass[1].height() == 128);
  CHECK(lp.bandpass[2].height() == 64);
  CHECK(lp.residual.height() == 32);
}

TEST_CASE("reconstruction is lossless within float tolerance") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(64, 256);
  for (int trial = 0; trial < 12; ++trial) {
    PyramidConfig<float> cfg;
    cfg.levels = 1 + trial % 3;
    const Imagef img = random_image(size(rng), size(rng), rng);
    const Imagef rec = reconstruct(build_laplacian(img, cfg), cfg);
    CHECK(max_abs_diff(rec.pixels, img.pixels) <= 1e-5f);
  }
}

TEST_CASE("zero bands reconstruct to the iterated upsampled residual") {
  PyramidConfig<float> cfg;
  cfg.levels = 2;
  std::mt19937_64 rng(6);
  auto lp = build_laplacian(random_image(32, 32, rng), cfg);
  for (auto& b : lp.bandpass) b.matrix().setZero();
  const Tensorf expect = dense_upsample(dense_upsample(lp.residual, 16, 16), 32, 32);
  CHECK(max_abs_diff(reconstruct(lp, cfg).pixels, expect) <= 1e-6f);
}

TEST_CASE("perturbing h_0 at one pixel moves only that output pixel") {
  PyramidConfig<float> cfg;
  std::mt19937_64 rng(7);
  auto lp = build_laplacian(random_image(32, 32, rng), cfg);
  const Imagef base = reconstruct(lp, cfg);
  lp.bandpass[0](1, 5, 9) += 0.125f;
  const Imagef moved = reconstruct(lp, cfg);
  const Tensorf diff = moved.pixels - base.pixels;
  CHECK(diff(1, 5, 9) == 0.125f);
  Tensorf rest = diff;
  rest(1, 5, 9) = 0.0f;
  CHECK(rest.matrix().cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("reconstruct_at_level endpoints and errors") {
  PyramidConfig<float> cfg;
  std::mt19937_64 rng(8);
  const auto lp = build_laplacian(random_image(512, 512, rng), cfg);
  CHECK(bit_identical(reconstruct_at_level(lp, 3, cfg), lp.residual));
  const Tensorf l1 = reconstruct_at_level(lp, 1, cfg);
  CHECK(l1.height() == 256);
  CHECK(l1.width() == 256);
  CHECK(bit_identical(reconstruct_at_level(lp, 0, cfg), reconstruct(lp, cfg).pixels));
  CHECK_THROWS_AS(reconstruct_at_level(lp, 4, cfg), Error);
  CHECK_THROWS_AS(reconstruct_at_level(lp, -1, cfg), Error);
}

TEST_CASE("levels 1..K of L(I_0) equal L(I_1) exactly") {
  PyramidConfig<float> cfg;
  std::mt19937_64 rng(9);
  const Imagef img = random_image(96, 80, rng);
  const auto gp = build_gaussian(img, cfg);
  const auto lp0 = build_laplacian(img, cfg);
  PyramidConfig<float> sub = cfg;
  sub.levels = cfg.levels - 1;
  const auto lp1 = build_laplacian(Imagef(gp.levels[1], img.range), sub);
  for (int k = 1; k < cfg.levels; ++k) CHECK(bit_identical(lp0.bandpass[k], lp1.bandpass[k - 1]));
  CHECK(bit_identical(lp0.residual, lp1.residual));
}

TEST_CASE("laplacian decomposition is linear") {
  PyramidConfig<float> cfg;
  std::mt19937_64 rng(10);
  const Imagef a = random_image(64, 48, rng), b = random_image(64, 48, rng);
  const Imagef mix(0.7f * a.pixels + (-1.3f) * b.pixels, RangeTag::kUnit);
  const auto la = build_laplacian(a, cfg), lb = build_laplacian(b, cfg), lm = build_laplacian(mix, cfg);
  for (int k = 0; k < cfg.levels; ++k) {
    CHECK(max_abs_diff(lm.bandpass[k], 0.7f * la.bandpass[k] + (-1.3f) * lb.bandpass[k]) <= 1e-5f);
  }
  CHECK(max_abs_diff(lm.residual, 0.7f * la.residual + (-1.3f) * lb.residual) <= 1e-5f);
}

TEST_CASE("bands of tissue tiles are near zero-mean and carry less variance than the residual") {
  PyramidConfig<float> cfg;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto lp = build_laplacian(synthetic_tissue(128, 128, seed), cfg);
    const auto res = nn::channel_moments(lp.residual);
    for (const auto& band : lp.bandpass) {
      const auto m = nn::channel_moments(band);
      for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(m.mean[c]) <= 0.02);
        CHECK(m.variance[c] < res.variance[c]);
      }
    }
  }
}

TEST_CASE("dimension and shape errors") {
  PyramidConfig<float> cfg;
  std::mt19937_64 rng(11);
  try {
    build_laplacian(random_image(7, 64, rng), cfg);
    FAIL("expected DimsTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimsTooSmall);
  }
  auto lp = build_laplacian(random_image(32, 32, rng), cfg);
  lp.bandpass[0] = Tensorf::Zero(3, 30, 32);
  try {
    reconstruct(lp, cfg);
    FAIL("expected DimMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimMismatch);
  }
}

TEST_CASE("band-pass scales: mean of peaks") {
  PyramidConfig<float> cfg;
  std::mt19937_64 rng(12);
  const Imagef base = random_image(64, 64, rng);
  const float p0 = bandpass_peaks(build_laplacian(base, cfg))[0];
  const float p1 = bandpass_peaks(build_laplacian(base, cfg))[1];

  SUBCASE("single image with h_0 peak 0.5") {
    const std::vector<Imagef> one{Imagef((0.5f / p0) * base.pixels, RangeTag::kUnit)};
    const auto s = compute_bp_scales(std::span<const Imagef>(one), cfg);
    CHECK(s.sigma[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(s.rho[0] == doctest::Approx(2.0).epsilon(1e-6));
  }
  SUBCASE("two images with h_1 peaks 0.2 and 0.4") {
    const std::vector<Imagef> two{Imagef((0.2f / p1) * base.pixels, RangeTag::kUnit),
                                  Imagef((0.4f / p1) * base.pixels, RangeTag::kUnit)};
    const auto s = compute_bp_scales(std::span<const Imagef>(two), cfg);
    CHECK(s.sigma[1] == doctest::Approx(0.3).epsilon(1e-6));
    for (std::size_t k = 0; k < s.sigma.size(); ++k) {
      CHECK(std::abs(s.sigma[k] * s.rho[k] - 1.0f) <= 1e-7f);
    }
    const std::vector<Imagef> swapped{two[1], two[0]};
    const auto t = compute_bp_scales(std::span<const Imagef>(swapped), cfg);
    CHECK(t.sigma == s.sigma);
  }
  SUBCASE("constant images are degenerate") {
    const std::vector<Imagef> flat{Imagef(Tensorf::Constant(3, 32, 32, 0.5f), RangeTag::kUnit)};
    try {
      compute_bp_scales(std::span<const Imagef>(flat), cfg);
      FAIL("expected DegenerateScale");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDegenerateScale);
    }
  }
  SUBCASE("empty dataset") {
    const std::vector<Imagef> none;
    CHECK_THROWS_AS(compute_bp_scales(std::span<const Imagef>(none), cfg), Error);
  }
}

}  // namespace
}  // namespace lpstain
