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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>

#include "lpstain/architecture.hpp"
#include "lpstain/classical.hpp"
#include "lpstain/cli.hpp"
#include "lpstain/fsutil.hpp"
#include "lpstain/image_io.hpp"
#include "lpstain/objective.hpp"
#include "lpstain/store.hpp"
#include "lpstain/synthetic.hpp"
#include "test_support.hpp"

namespace lpstain {
namespace {

namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

const ConvStainNetwork& generator() {
  static const ConvStainNetwork net(init_random(ModelKind::kGenerator, 3, 8, 2026));
  return net;
}

// 1. Reconstruction is lossless on random tiles.
Outcome lp_lossless() {
  const auto t0 = clock_type::now();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> size(64, 512);
  float worst = 0.0f;
  for (int i = 0; i < 100; ++i) {
    PyramidConfig<float> cfg;
    cfg.levels = 1 + i % 3;
    const Imagef img = testing::random_image(size(rng), size(rng), rng);
    worst = std::max(worst, max_abs_diff(reconstruct(build_laplacian(img, cfg), cfg).pixels, img.pixels));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-5f && secs < 60.0,
          "max error " + fmt("%.3g", worst) + " over 100 tiles in " + fmt("%.2f", secs) + " s"};
}

// 2. Levels 1..K of L(I_0) equal L(I_1).
Outcome lp_recursion() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> size(32, 256);
  int exact = 0;
  for (int i = 0; i < 20; ++i) {
    PyramidConfig<float> cfg;
    cfg.levels = 2 + i % 2;
    const Imagef img = testing::random_image(size(rng), size(rng), rng);
    const auto gp = build_gaussian(img, cfg);
    const auto lp0 = build_laplacian(img, cfg);
    PyramidConfig<float> sub = cfg;
    sub.levels = cfg.levels - 1;
    const auto lp1 = build_laplacian(Imagef(gp.levels[1], img.range), sub);
    bool same = bit_identical(lp0.residual, lp1.residual);
    for (int k = 1; k < cfg.levels; ++k) same = same && bit_identical(lp0.bandpass[k], lp1.bandpass[k - 1]);
    exact += same;
  }
  return {exact == 20, std::to_string(exact) + "/20 tiles bit-identical"};
}

// 3. Output at level 1 equals the level-1 reconstruction of the level-0 run.
Outcome multi_resolution() {
  const auto& net = generator();
  int exact = 0;
  for (int t = 0; t < 10; ++t) {
    const int size = 64 + 16 * t;
    const Imagef img = to_symmetric(synthetic_tissue(size, size, 300 + t));
    for (std::uint64_t s = 0; s < 3; ++s) {
      std::mt19937_64 rng(s);
      const Vectorf z = sample_standard_normal(net.latent_dim(), rng);
      const auto full = transfer_detailed(img, z, net, 0);
      const Imagef l1 = transfer(img, z, net, 1);
      exact += bit_identical(l1.pixels, reconstruct_at_level(full.pyramid, 1, generator_pyramid(net)));
    }
  }
  return {exact == 30, std::to_string(exact) + "/30 tile x seed cases bit-identical"};
}

// 4. AdaIN imposes the target moments.
Outcome adain_moments() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> side(16, 40), channels(1, 4);
  std::uniform_real_distribution<float> alpha(-5.0f, 5.0f), beta(0.05f, 5.0f), scale(1.0f, 10.0f);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int c = channels(rng);
    const float sc = scale(rng), off = alpha(rng);
    Tensorf x = testing::random_tensor(c, side(rng), side(rng), rng, -1.0f, 1.0f);
    x.matrix() = (x.matrix().array() * sc + off).matrix();
    nn::AdaINParams<float> p{Vectorf(c), Vectorf(c)};
    for (int j = 0; j < c; ++j) {
      p.alpha(j) = alpha(rng);
      p.beta(j) = beta(rng);
    }
    const auto m = nn::channel_moments(nn::adain(x, p));
    for (int j = 0; j < c; ++j) {
      worst = std::max({worst, std::abs(m.mean[j] - p.alpha(j)),
                        std::abs(std::sqrt(m.variance[j]) - p.beta(j))});
    }
  }
  return {worst <= 1e-4, "max moment error " + fmt("%.3g", worst) + " over 1000 cases"};
}

// 5. Band-pass perturbations never reach the stain code.
Outcome stain_locality() {
  const auto& net = generator();
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> level(0, net.levels() - 1);
  std::uniform_real_distribution<float> amp(1e-4f, 1.0f);
  int exact = 0;
  for (int i = 0; i < 50; ++i) {
    const Imagef img = to_symmetric(synthetic_tissue(64, 64, 500 + i));
    const StainVector base = extract_stain(img, net);
    auto lp = build_laplacian(img, generator_pyramid(net));
    const int k = level(rng);
    const auto& b = lp.bandpass[k];
    lp.bandpass[k] = b + testing::random_tensor(3, b.height(), b.width(), rng, -amp(rng), amp(rng));
    if (i % 5 == 0) {
      for (auto& band : lp.bandpass) band.matrix().array() += 0.1f;
    }
    const StainVector moved = encode_pyramid(lp, net).stain;
    exact += (base.mu.array() == moved.mu.array()).all() &&
             (base.logvar.array() == moved.logvar.array()).all();
  }
  return {exact == 50, std::to_string(exact) + "/50 perturbations left the stain bit-identical"};
}

// 6. Loss oracles and properties.
Outcome loss_oracles() {
  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-6; };

  // Tabulated examples.
  {
    StainVector s{Vectorf::Zero(8), Vectorf::Zero(8), Vectorf::Zero(8)};
    check(near(loss_vae(s), 0.0), "KL(0,0)");
    s.mu(0) = 1.0f;
    check(near(loss_vae(s), 0.5), "KL(e1,0)");

    const std::vector<Tensorf> half{Tensorf::Constant(1, 4, 4, 0.5f)};
    check(near(loss_adversarial(half, half).discriminator, 0.25), "d_loss at 0.5");
    check(near(loss_adversarial({Tensorf::Constant(1, 4, 4, 1.0f)}, {Tensorf::Zero(1, 4, 4)}).discriminator, 0.0),
          "d_loss perfect");

    Vectorf a = Vectorf::Zero(8), b = a;
    b(3) = 1.0f;
    check(near(loss_latent_regression(a, b), 0.125), "latent regression 0.125");

    const Imagef i0(Tensorf::Zero(3, 8, 8), RangeTag::kSymmetric);
    const Imagef i2(Tensorf::Constant(3, 8, 8, 2.0f), RangeTag::kSymmetric);
    check(near(loss_mode_seeking(Vectorf::Zero(8), Vectorf::Ones(8), i0, i2, 1e-8), 0.5), "mode seeking 0.5");

    std::mt19937_64 rng(60);
    PyramidConfig<float> cfg;
    cfg.levels = 2;
    const auto lp = build_laplacian(testing::random_image(32, 32, rng), cfg);
    auto shifted = lp;
    shifted.bandpass[0].matrix().array() += 0.5f;
    check(near(loss_identity(lp, shifted, {2.0, 1.0, 1.0}), 1.0), "identity offset");
    check(near(loss_cross_cycle(lp, shifted, {2.0, 1.0, 1.0}), 1.0), "cross-cycle offset");
    check(near(loss_identity(lp, shifted, {4.0, 2.0, 2.0}), 2.0), "identity doubling");

    const FeatureExtractor linear(init_random(ModelKind::kFeatureExtractor, 4, 0, 61), 1.0f);
    const Imagef t = to_symmetric(synthetic_tissue(32, 32, 62));
    Imagef affine = t;
    const float off[3] = {0.2f, -0.4f, 0.1f};
    for (int c = 0; c < 3; ++c) {
      affine.pixels.matrix().row(c) = (0.6f * t.pixels.matrix().row(c).array() + off[c]).matrix();
    }
    check(loss_structure(t, affine, linear) <= 1e-4, "structure affine invariance");
  }

  // Nonnegativity and fixed points over random draws.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> u(-3.0f, 3.0f);
  const FeatureExtractor fe(init_random(ModelKind::kFeatureExtractor, 4, 0, 63));
  PyramidConfig<float> cfg;
  cfg.levels = 1;
  const std::vector<double> m{1.0, 1.0};
  bool nonneg = true, fixed = true;
  for (int i = 0; i < 1000; ++i) {
    StainVector s{Vectorf(8), Vectorf(8), Vectorf()};
    for (int j = 0; j < 8; ++j) {
      s.mu(j) = u(rng);
      s.logvar(j) = u(rng);
    }
    const Vectorf z1 = s.mu, z2 = s.logvar;
    const Imagef a = testing::random_image(32, 32, rng, RangeTag::kSymmetric);
    const Imagef b = testing::random_image(32, 32, rng, RangeTag::kSymmetric);
    const auto la = build_laplacian(a, cfg), lb = build_laplacian(b, cfg);
    const std::vector<Tensorf> real{testing::random_tensor(1, 2, 2, rng, -2, 2)};
    const std::vector<Tensorf> fake{testing::random_tensor(1, 2, 2, rng, -2, 2)};
    const auto adv = loss_adversarial(real, fake);
    for (double v : {loss_vae(s), loss_latent_regression(z1, z2), loss_mode_seeking(z1, z2, a, b, 1e-8),
                     loss_identity(la, lb, m), loss_cross_cycle(la, lb, m), loss_structure(a, b, fe),
                     adv.discriminator, adv.generator}) {
      nonneg = nonneg && v >= 0.0 && std::isfinite(v);
    }
    const StainVector prior{Vectorf::Zero(8), Vectorf::Zero(8), Vectorf()};
    const std::vector<Tensorf> ones{Tensorf::Constant(1, 2, 2, 1.0f)}, zeros{Tensorf::Zero(1, 2, 2)};
    fixed = fixed && loss_vae(prior) == 0.0 && loss_latent_regression(z1, z1) == 0.0 &&
            loss_mode_seeking(z1, z1, a, b, 1e-8) == 0.0 && loss_identity(la, la, m) == 0.0 &&
            loss_cross_cycle(la, la, m) == 0.0 && loss_structure(a, a, fe) == 0.0 &&
            loss_adversarial(ones, zeros).discriminator == 0.0 &&
            loss_adversarial(ones, ones).generator == 0.0;
  }
  check(nonneg, "nonnegativity sweep");
  check(fixed, "fixed-point sweep");
  std::string detail = "tabulated oracles + 1000-draw sweeps";
  for (const auto& f : failures) detail += "; failed: " + f;
  return {failures.empty(), detail};
}

// 7. Weighted objective on unit components.
Outcome objective_wiring() {
  const LossComponents unit{1, 1, 1, 1, 1, 1, 1};
  const double total = combine_objective(unit, LossWeights{});
  return {total == 22.53, "total = " + fmt("%.15g", total) + (total == 22.53 ? " (exact)" : " (inexact)")};
}

// 8. Classical oracles.
Outcome classical_oracles() {
  std::mt19937_64 rng(8);
  float round_trip = 0.0f;
  for (int i = 0; i < 50; ++i) {
    const Imagef img(testing::random_tensor(3, 48, 48, rng, 8.0f / 255.0f, 1.0f), RangeTag::kUnit);
    round_trip = std::max(round_trip, max_abs_diff(hed_to_rgb(rgb_to_hed(img)).pixels, img.pixels));
  }
  const Eigen::Vector3d h = StainMatrix::standard_hed().rows.row(0).transpose();
  const Eigen::Vector3d e = StainMatrix::standard_hed().rows.row(1).transpose();
  auto worst_angle = [&](double noise) {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
      const StainMatrix m = macenko_separate(synthetic_two_stain(64, 64, 800 + s, h, e, noise));
      worst = std::max({worst, angle_degrees(m.rows.row(0).transpose(), h),
                        angle_degrees(m.rows.row(1).transpose(), e)});
    }
    return worst;
  };
  const double clean = worst_angle(0.0), noisy = worst_angle(0.02);
  return {round_trip <= 2.0f / 255.0f && clean <= 2.0 && noisy <= 5.0,
          "HED round trip " + fmt("%.3g", round_trip * 255.0f) + "/255, Macenko worst " +
              fmt("%.3f", clean) + " deg clean, " + fmt("%.3f", noisy) + " deg at OD noise 0.02"};
}

// 9. Performance shape.
Outcome performance() {
  const auto macs = arch::generator_macs(512, 512, 3);
  const bool a = macs.bandpass[0] < macs.residual;

  cli::BenchConfig cfg;
  cfg.sizes = {1024, 2048};
  cfg.methods = {"gsan@k0", "hed-jitter"};
  cfg.repetitions = 3;
  const auto rows = cli::run_bench(cfg, generator());
  auto median = [&](const std::string& method, int size) {
    for (const auto& r : rows) {
      if (r.method == method && r.size == size) return r.median_seconds;
    }
    return -1.0;
  };
  const double g1 = median("gsan@k0", 1024), g2 = median("gsan@k0", 2048);
  const double hed = median("hed-jitter", 2048);
  const double ratio = g2 / g1;
  const bool b = ratio <= 5.0;
  const bool c = g2 < hed;
  std::string detail = std::string("(a) ") + (a ? "pass" : "FAIL") + " BP k=0 " +
                       std::to_string(macs.bandpass[0]) + " MAC vs residual " +
                       std::to_string(macs.residual) + " MAC at 512^2; (b) " + (b ? "pass" : "FAIL") +
                       " t(2048)/t(1024) = " + fmt("%.2f", ratio) + "; (c) " + (c ? "pass" : "FAIL") +
                       " gsan@k0 " + fmt("%.3f", g2) + " s vs hed-jitter " + fmt("%.3f", hed) +
                       " s at 2048^2";
  return {a && b && c, detail};
}

// 10. CLI augment output does not depend on the thread count.
Outcome cli_determinism() {
  const fs::path root = testing::scratch_dir("acceptance_cli");
  fs::create_directories(root / "in");
  for (int i = 0; i < 8; ++i) write_png(root / "in" / ("t" + std::to_string(i) + ".png"), synthetic_tissue(64, 64, 1000 + i));
  save_file(init_random(ModelKind::kGenerator, 3, 8, 10), root / "g.gsw");
  auto run = [&](const std::string& threads, const std::string& out) {
    return cli::run({"lpstain", "augment", (root / "in").string(), "--weights", (root / "g.gsw").string(),
                     "--seed", "7", "--threads", threads, "--out", (root / out).string()});
  };
  if (run("1", "one") != 0 || run("8", "eight") != 0) return {false, "augment run failed"};
  int files = 0, same = 0;
  for (const auto& entry : fs::directory_iterator(root / "one")) {
    ++files;
    const fs::path other = root / "eight" / entry.path().filename();
    same += fs::exists(other) && read_file(entry.path()) == read_file(other);
  }
  return {files == 16 && same == files, std::to_string(same) + "/" + std::to_string(files) +
                                            " output files byte-identical (1 vs 8 threads)"};
}

// 11. GSW1 round trip and corrupted fixtures.
Outcome gsw1() {
  const WeightStore store = init_random(ModelKind::kGenerator, 3, 8, 11);
  const auto bytes = save(store);
  bool round_trip = save(load(bytes)) == bytes;
  for (auto kind : {ModelKind::kDiscriminator, ModelKind::kFeatureExtractor}) {
    const auto b = save(init_random(kind, kind == ModelKind::kFeatureExtractor ? 4 : 3, 0, 11));
    round_trip = round_trip && save(load(b)) == b;
  }

  auto code = [](const std::vector<std::uint8_t>& b, std::string* message = nullptr) {
    try {
      load(b);
    } catch (const Error& e) {
      if (message) *message = e.what();
      return e.code();
    }
    return ErrorCode::kIo;
  };
  std::vector<std::string> missed;
  auto b = bytes;
  b[0] = 'X';
  if (code(b) != ErrorCode::kBadMagic) missed.push_back("BadMagic");
  b = bytes;
  b[4] = 7;
  if (code(b) != ErrorCode::kBadMagic) missed.push_back("BadMagic(version)");
  b = bytes;
  b[8] = 0;
  if (code(b) != ErrorCode::kUnknownModelKind) missed.push_back("UnknownModelKind");
  std::string msg;
  b.assign(bytes.begin(), bytes.end() - 4);
  if (code(b, &msg) != ErrorCode::kTruncatedPayload || msg.find(store.tensors.rbegin()->first) == std::string::npos) {
    missed.push_back("TruncatedPayload");
  }
  b.assign(bytes.begin(), bytes.begin() + 20);
  if (code(b) != ErrorCode::kTruncatedPayload) missed.push_back("TruncatedPayload(table)");
  b = bytes;
  const int len = b[16] | (b[17] << 8);
  b[18 + len + 1] += 1;
  if (code(b, &msg) != ErrorCode::kShapeMismatch || msg.find(store.tensors.begin()->first) == std::string::npos) {
    missed.push_back("ShapeMismatch");
  }
  WeightStore renamed = store;
  auto node = renamed.tensors.extract("gen.L1.conv1.w");
  node.key() = "gen.L1.conv9.w";
  renamed.tensors.insert(std::move(node));
  if (code(save(renamed)) != ErrorCode::kShapeMismatch) missed.push_back("ShapeMismatch(name)");

  std::string detail = std::string("round trip ") + (round_trip ? "byte-identical" : "DIFFERS") +
                       ", 7 corrupted fixtures";
  for (const auto& m : missed) detail += "; missed " + m;
  return {round_trip && missed.empty(), detail};
}

}  // namespace
}  // namespace lpstain

int main() {
  using lpstain::Outcome;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"LP losslessness", lpstain::lp_lossless},
      {"LP recursion", lpstain::lp_recursion},
      {"generator multi-resolution contract", lpstain::multi_resolution},
      {"AdaIN moment contract", lpstain::adain_moments},
      {"stain locality", lpstain::stain_locality},
      {"loss oracles", lpstain::loss_oracles},
      {"objective wiring", lpstain::objective_wiring},
      {"classical oracles", lpstain::classical_oracles},
      {"performance shape", lpstain::performance},
      {"CLI determinism", lpstain::cli_determinism},
      {"GSW1 container", lpstain::gsw1},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2zu %s: %s -- %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
