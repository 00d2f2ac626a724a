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

#include "lpstain/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "lpstain/architecture.hpp"
#include "lpstain/classical.hpp"
#include "lpstain/fsutil.hpp"
#include "lpstain/image_io.hpp"
#include "lpstain/store.hpp"
#include "lpstain/synthetic.hpp"

namespace lpstain::cli {
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string weights;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out = ".";
  bool keep_going = false;
};

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("LPSTAIN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    throw UsageError("LPSTAIN_THREADS must be a positive integer");
  }
  return 1;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (auto& p : list_png_files(in)) out.push_back(std::move(p));
    } else {
      out.emplace_back(in);
    }
  }
  if (out.empty()) throw UsageError("no input images");
  return out;
}

/// Runs `fn` over the inputs on a pool of workers; one file per task.
/// Failures are logged in input order and mapped to an exit code.
int for_each_input(const std::vector<fs::path>& inputs, int threads, bool keep_going,
                   const std::function<void(const fs::path&)>& fn) {
  struct Failure {
    ErrorCode code;
    std::string message;
  };
  std::vector<std::optional<Failure>> failures(inputs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  auto worker = [&] {
    for (;;) {
      if (stop.load() && !keep_going) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= inputs.size()) return;
      try {
        fn(inputs[i]);
      } catch (const Error& e) {
        failures[i] = Failure{e.code(), e.what()};
        stop = true;
      } catch (const std::exception& e) {
        failures[i] = Failure{ErrorCode::kIo, e.what()};
        stop = true;
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(inputs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = kExitOk;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!failures[i]) continue;
    std::cerr << "lpstain: " << inputs[i].string() << ": " << failures[i]->message << '\n';
    if (code == kExitOk) code = exit_code_for(failures[i]->code);
  }
  return code;
}

ConvStainNetwork load_network(const Globals& g) {
  if (g.weights.empty()) throw UsageError("--weights is required");
  return ConvStainNetwork(load_file(g.weights));
}

std::vector<float> to_std(const Vectorf& v) { return {v.data(), v.data() + v.size()}; }

Vectorf from_std(const std::vector<float>& v) {
  return Eigen::Map<const Vectorf>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Stain sample from a stain JSON ("sample", else "mu") or a reference PNG.
Vectorf stain_from(const std::string& source, const StainNetwork& net) {
  if (fs::path(source).extension() == ".json") {
    const auto bytes = read_file(source);
    try {
      const auto j = json::parse(bytes.begin(), bytes.end());
      const auto v = j.contains("sample") ? j.at("sample").get<std::vector<float>>()
                                          : j.at("mu").get<std::vector<float>>();
      if (static_cast<int>(v.size()) != net.latent_dim()) {
        fail(ErrorCode::kShapeMismatch, source + ": stain has " + std::to_string(v.size()) +
                                            " entries, d_s = " +
                                            std::to_string(net.latent_dim()));
      }
      return from_std(v);
    } catch (const json::exception& e) {
      fail(ErrorCode::kBadSidecar, source + ": " + e.what());
    }
  }
  return extract_stain(to_symmetric(read_png(source)), net).mu;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "' in '" + text + "'");
    }
  }
  return out;
}

std::pair<double, double> parse_range_pair(const std::string& text) {
  const auto v = parse_list(text);
  if (v.size() != 2 || v[0] > v[1]) throw UsageError("expected LO,HI: " + text);
  return {v[0], v[1]};
}

std::string t_label(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", t);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBadMagic:
    case ErrorCode::kTruncatedPayload:
    case ErrorCode::kUnknownModelKind:
    case ErrorCode::kBadSidecar:
    case ErrorCode::kUnreadableImage:
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kWeightShapeMismatch:
      return kExitFormat;
    default:
      return kExitData;
  }
}

std::uint64_t file_seed(std::uint64_t seed, const std::string& stem) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : stem) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  // splitmix64 finalizer
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<BenchRow> run_bench(const BenchConfig& cfg, const StainNetwork& net) {
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  std::mt19937_64 rng(cfg.seed);
  const Vectorf stain = sample_standard_normal(net.latent_dim(), rng);
  for (int size : cfg.sizes) {
    const Imagef tile = synthetic_tissue(size, size, cfg.seed + static_cast<std::uint64_t>(size));
    const Imagef sym = to_symmetric(tile);
    for (const auto& method : cfg.methods) {
      std::function<void()> task;
      std::optional<std::int64_t> flops;
      if (method == "gsan@k0" || method == "gsan@k1") {
        const int level = method == "gsan@k0" ? 0 : 1;
        task = [&, level] { (void)transfer(sym, stain, net, level); };
        flops = 2 * arch::generator_macs(size, size, net.levels(), level, net.latent_dim()).total();
      } else if (method == "hed-jitter") {
        JitterConfig jc;
        jc.seed = cfg.seed;
        task = [&, jc] { (void)hed_jitter(tile, jc); };
      } else if (method == "macenko") {
        task = [&] { (void)macenko_separate(tile); };
      } else {
        throw UsageError("unknown bench method " + method);
      }
      std::vector<double> times;
      for (int r = 0; r < cfg.repetitions; ++r) {
        const auto t0 = clock::now();
        task();
        times.push_back(std::chrono::duration<double>(clock::now() - t0).count());
      }
      rows.push_back({method, size, median(times), flops});
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "method,size,median_s,flops\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", r.median_seconds);
    os << r.method << ',' << r.size << ',' << buf << ',';
    if (r.flops) os << *r.flops;
    os << '\n';
  }
  return os.str();
}

std::string flop_table(const std::vector<int>& sizes, int levels) {
  std::ostringstream os;
  os << "size";
  for (int k = 0; k < levels; ++k) os << "\tbp" << k << "_mac";
  os << "\tresidual_mac\tstyle_mac\ttotal_mac\n";
  for (int s : sizes) {
    const auto m = arch::generator_macs(s, s, levels);
    os << s;
    for (auto b : m.bandpass) os << '\t' << b;
    os << '\t' << m.residual << '\t' << m.style << '\t' << m.total() << '\n';
  }
  return os.str();
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Laplacian-pyramid stain augmentation toolkit", "lpstain"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--weights", g.weights, "GSW1 weights file");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads (default: LPSTAIN_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--keep-going", g.keep_going, "Continue past per-file failures");

  std::vector<std::string> inputs;
  int levels = 3;
  int out_level = 0;
  std::string ref, stain_json, from, to, t_grid = "0,0.25,0.5,0.75,1";
  std::string alpha_range = "0.95,1.05", beta_range = "-0.05,0.05", stain_matrix;
  double io_cutoff = 0.15, alpha_percentile = 1.0;
  std::string sizes = "256,512,1024,2048", methods = "gsan@k0,gsan@k1,hed-jitter,macenko";
  int reps = 5;
  std::string csv_path, kind = "generator", weights_out;
  int latent_dim = arch::kDefaultLatentDim;
  bool patch = false;

  auto* decompose = app.add_subcommand("decompose", "Write per-level PNGs and a JSON sidecar");
  decompose->add_option("inputs", inputs, "PNG files or directories")->required();
  decompose->add_option("--K", levels, "Pyramid depth")->check(CLI::Range(1, 8));

  auto* reconstruct_cmd = app.add_subcommand("reconstruct", "Rebuild images from pyramids");
  reconstruct_cmd->add_option("inputs", inputs, "Pyramid directories")->required();

  auto* augment = app.add_subcommand("augment", "Random stain augmentation");
  augment->add_option("inputs", inputs)->required();
  augment->add_option("--out-level", out_level)->check(CLI::NonNegativeNumber);

  auto* transfer_cmd = app.add_subcommand("transfer", "Transfer a reference stain");
  transfer_cmd->add_option("inputs", inputs)->required();
  auto* ref_opt = transfer_cmd->add_option("--ref", ref, "Reference PNG");
  auto* stain_opt = transfer_cmd->add_option("--stain", stain_json, "Stain JSON");
  ref_opt->excludes(stain_opt);
  transfer_cmd->add_option("--out-level", out_level)->check(CLI::NonNegativeNumber);

  auto* extract = app.add_subcommand("extract", "Write stain codes as JSON");
  extract->add_option("inputs", inputs)->required();

  auto* interpolate = app.add_subcommand("interpolate", "Blend two stains over a t grid");
  interpolate->add_option("inputs", inputs)->required();
  interpolate->add_option("--from", from, "Stain source at t=0 (PNG or JSON)")->required();
  interpolate->add_option("--to", to, "Stain source at t=1 (PNG or JSON)")->required();
  interpolate->add_option("--t", t_grid, "Comma-separated t values in [0,1]");
  interpolate->add_option("--out-level", out_level)->check(CLI::NonNegativeNumber);

  auto* jitter = app.add_subcommand("jitter", "HED color-deconvolution jitter");
  jitter->add_option("inputs", inputs)->required();
  jitter->add_option("--alpha-range", alpha_range, "Multiplicative noise LO,HI");
  jitter->add_option("--beta-range", beta_range, "Additive noise LO,HI");
  jitter->add_option("--stain-matrix", stain_matrix, "Stain matrix JSON override");

  auto* separate = app.add_subcommand("separate", "Macenko stain matrix as JSON");
  separate->add_option("inputs", inputs)->required();
  separate->add_option("--io-cutoff", io_cutoff, "OD tissue cutoff");
  separate->add_option("--alpha-percentile", alpha_percentile, "Angular percentile");

  auto* bench = app.add_subcommand("bench", "Timing and analytic FLOP report");
  bench->add_option("--sizes", sizes, "Comma-separated square sizes");
  bench->add_option("--methods", methods, "Comma-separated methods");
  bench->add_option("--reps", reps, "Repetitions per cell")->check(CLI::PositiveNumber);
  bench->add_option("--csv", csv_path, "CSV output path (default stdout)");

  auto* init = app.add_subcommand("init-weights", "Seeded GSW1 weights");
  init->add_option("path", weights_out, "Output file")->required();
  init->add_option("--kind", kind)->check(
      CLI::IsMember({"generator", "discriminator", "feature-extractor"}));
  init->add_option("--K", levels, "Pyramid depth (stage count for feature-extractor)")
      ->check(CLI::Range(1, 8));
  init->add_option("--latent-dim", latent_dim)->check(CLI::Range(1, 1024));

  auto* inspect_cmd = app.add_subcommand("inspect", "List the tensors of a GSW1 file");
  inspect_cmd->add_option("path", weights_out)->required();

  auto* stats = app.add_subcommand("stats", "Band-pass scales of an image set");
  stats->add_option("inputs", inputs)->required();
  stats->add_option("--K", levels)->check(CLI::Range(1, 8));
  stats->add_flag("--patch", patch, "Write sigma into the --weights file");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const fs::path out_dir = g.out;
  try {
    const int threads = resolve_threads(g.threads);

    if (*decompose) {
      std::optional<std::vector<double>> sigma;
      if (!g.weights.empty()) {
        const ConvStainNetwork net = load_network(g);
        sigma = std::vector<double>(net.bp_scales().sigma.begin(), net.bp_scales().sigma.end());
      }
      PyramidConfig<float> cfg;
      cfg.levels = levels;
      return for_each_input(expand_inputs(inputs), threads, g.keep_going, [&](const fs::path& p) {
        write_pyramid(out_dir / p.stem(), build_laplacian(read_png(p), cfg), sigma);
      });
    }

    if (*reconstruct_cmd) {
      std::vector<fs::path> dirs(inputs.begin(), inputs.end());
      return for_each_input(dirs, threads, g.keep_going, [&](const fs::path& p) {
        const auto lp = read_pyramid(p);
        PyramidConfig<float> cfg;
        cfg.levels = lp.levels();
        const fs::path dir = fs::is_directory(p) ? p : p.parent_path();
        write_png(out_dir / (fs::absolute(dir).lexically_normal().filename().string() + ".png"),
                  reconstruct(lp, cfg));
      });
    }

    if (*augment || *transfer_cmd || *extract || *interpolate) {
      const ConvStainNetwork net = load_network(g);
      const auto files = expand_inputs(inputs);
      if (!*extract && (out_level < 0 || out_level >= net.levels())) {
        throw UsageError("--out-level must lie in [0, K-1] = [0, " +
                         std::to_string(net.levels() - 1) + "]");
      }
      if (*augment) {
        return for_each_input(files, threads, g.keep_going, [&](const fs::path& p) {
          const std::uint64_t seed = file_seed(g.seed, p.stem().string());
          const Augmentation a = augment_random(to_symmetric(read_png(p)), seed, net, out_level);
          write_png(out_dir / (p.stem().string() + ".png"), a.image);
          json j;
          j["file"] = p.filename().string();
          j["seed"] = seed;
          j["sample"] = to_std(a.stain);
          write_file_atomic(out_dir / (p.stem().string() + ".stain.json"), j.dump() + "\n");
        });
      }
      if (*transfer_cmd) {
        if (ref.empty() && stain_json.empty()) throw UsageError("transfer needs --ref or --stain");
        const Vectorf stain = stain_from(ref.empty() ? stain_json : ref, net);
        return for_each_input(files, threads, g.keep_going, [&](const fs::path& p) {
          write_png(out_dir / (p.stem().string() + ".png"),
                    transfer(to_symmetric(read_png(p)), stain, net, out_level));
        });
      }
      if (*extract) {
        return for_each_input(files, threads, g.keep_going, [&](const fs::path& p) {
          const StainVector s = extract_stain(to_symmetric(read_png(p)), net);
          json j;
          j["file"] = p.filename().string();
          j["mu"] = to_std(s.mu);
          j["logvar"] = to_std(s.logvar);
          j["sample"] = to_std(s.sample);
          write_file_atomic(out_dir / (p.stem().string() + ".stain.json"), j.dump() + "\n");
        });
      }
      const Vectorf a = stain_from(from, net);
      const Vectorf b = stain_from(to, net);
      const auto grid = parse_list(t_grid);
      for (double t : grid) {
        if (!(t >= 0.0 && t <= 1.0)) throw UsageError("t values must lie in [0, 1]");
      }
      return for_each_input(files, threads, g.keep_going, [&](const fs::path& p) {
        const Imagef img = to_symmetric(read_png(p));
        for (double t : grid) {
          write_png(out_dir / (p.stem().string() + "_t" + t_label(t) + ".png"),
                    transfer(img, interpolate_stain(a, b, static_cast<float>(t)), net, out_level));
        }
      });
    }

    if (*jitter) {
      const auto [alo, ahi] = parse_range_pair(alpha_range);
      const auto [blo, bhi] = parse_range_pair(beta_range);
      const StainMatrix m =
          stain_matrix.empty() ? StainMatrix::standard_hed() : load_stain_matrix_json(stain_matrix);
      return for_each_input(expand_inputs(inputs), threads, g.keep_going, [&](const fs::path& p) {
        JitterConfig jc{alo, ahi, blo, bhi, file_seed(g.seed, p.stem().string())};
        write_png(out_dir / (p.stem().string() + ".png"), hed_jitter(read_png(p), jc, m));
      });
    }

    if (*separate) {
      const auto files = expand_inputs(inputs);
      std::vector<std::string> lines(files.size());
      const int code = for_each_input(files, threads, g.keep_going, [&](const fs::path& p) {
        const StainMatrix m = macenko_separate(read_png(p), {io_cutoff, alpha_percentile});
        json j = json::parse(stain_matrix_json(m));
        json line;
        line["file"] = p.filename().string();
        for (auto& [key, value] : j.items()) line[key] = value;
        lines[&p - files.data()] = line.dump();
      });
      for (const auto& l : lines) {
        if (!l.empty()) std::cout << l << '\n';
      }
      return code;
    }

    if (*bench) {
      BenchConfig bc;
      bc.sizes.clear();
      for (double s : parse_list(sizes)) {
        const int v = static_cast<int>(s);
        if (v != s || v < 256 || v > 4096 || (v & (v - 1)) != 0) {
          throw UsageError("bench sizes must be powers of two in [256, 4096]");
        }
        bc.sizes.push_back(v);
      }
      bc.methods.clear();
      std::stringstream ms(methods);
      for (std::string m; std::getline(ms, m, ',');) bc.methods.push_back(m);
      bc.repetitions = reps;
      bc.seed = g.seed;
      const ConvStainNetwork net =
          g.weights.empty()
              ? ConvStainNetwork(init_random(ModelKind::kGenerator, 3, arch::kDefaultLatentDim, g.seed))
              : load_network(g);
      std::cerr << flop_table(bc.sizes, net.levels());
      const std::string csv = bench_csv(run_bench(bc, net));
      if (csv_path.empty()) {
        std::cout << csv;
      } else {
        write_file_atomic(csv_path, csv);
      }
      return kExitOk;
    }

    if (*init) {
      const ModelKind mk = parse_model_kind(kind);
      if (mk == ModelKind::kFeatureExtractor && init->count("--K") == 0) {
        levels = arch::kFeatureStages;
      }
      if (mk == ModelKind::kFeatureExtractor && levels > arch::kFeatureStages) {
        throw UsageError("feature extractor has at most 4 stages");
      }
      save_file(init_random(mk, levels, latent_dim, g.seed), weights_out);
      return kExitOk;
    }

    if (*inspect_cmd) {
      std::cout << inspect(load_file(weights_out));
      return kExitOk;
    }

    if (*stats) {
      const auto files = expand_inputs(inputs);
      PyramidConfig<float> cfg;
      cfg.levels = levels;
      const BPScales<float> scales = compute_bp_scales(std::span<const fs::path>(files), cfg);
      json j;
      j["K"] = levels;
      j["images"] = files.size();
      j["sigma"] = scales.sigma;
      j["rho"] = scales.rho;
      if (g.out == ".") {
        std::cout << j.dump() << '\n';
      } else {
        write_file_atomic(out_dir / "bp_scales.json", j.dump(2) + "\n");
      }
      if (patch) {
        if (g.weights.empty()) throw UsageError("--patch needs --weights");
        WeightStore store = load_file(g.weights);
        if (store.kind != ModelKind::kGenerator || store.levels != levels) {
          fail(ErrorCode::kWeightShapeMismatch, g.weights + " is not a K=" +
                                                    std::to_string(levels) + " generator");
        }
        store.tensors.at("bp.sigma").values = scales.sigma;
        save_file(store, g.weights);
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "lpstain: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "lpstain: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "lpstain: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace lpstain::cli
