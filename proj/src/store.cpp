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

#include "lpstain/store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "lpstain/architecture.hpp"
#include "lpstain/error.hpp"
#include "lpstain/fsutil.hpp"

namespace lpstain {
namespace {

constexpr char kMagic[4] = {'G', 'S', 'W', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 16;
constexpr std::size_t kAlign = 16;

std::string dims_string(const std::vector<std::uint32_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void pad_to(std::size_t offset) { bytes_.resize(offset, 0); }
  std::size_t size() const { return bytes_.size(); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  std::uint64_t uint(int n, const char* what) {
    need(n, what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) {
      fail(ErrorCode::kTruncatedPayload, std::string("file ends inside ") + what);
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t u32(int v) { return static_cast<std::uint32_t>(v); }

void add_conv(std::map<std::string, std::vector<std::uint32_t>>& inv,
              const arch::ConvEntry& e) {
  const auto& s = e.spec;
  inv[e.name + ".w"] = {u32(s.out_channels), u32(s.in_channels),
                        u32(s.kernel_size), u32(s.kernel_size)};
  inv[e.name + ".b"] = {u32(s.out_channels)};
}

void add_dense(std::map<std::string, std::vector<std::uint32_t>>& inv,
               const arch::DenseEntry& e) {
  inv[e.name + ".w"] = {u32(e.out), u32(e.in)};
  inv[e.name + ".b"] = {u32(e.out)};
}

// He fan-in: fan-in is every weight dimension except the leading one.
std::size_t fan_in(const std::vector<std::uint32_t>& dims) {
  std::size_t f = 1;
  for (std::size_t i = 1; i < dims.size(); ++i) f *= dims[i];
  return f;
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kGenerator: return "generator";
    case ModelKind::kDiscriminator: return "discriminator";
    case ModelKind::kFeatureExtractor: return "feature-extractor";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "generator") return ModelKind::kGenerator;
  if (name == "discriminator") return ModelKind::kDiscriminator;
  if (name == "feature-extractor") return ModelKind::kFeatureExtractor;
  fail(ErrorCode::kUnknownModelKind, std::string(name));
}

std::size_t StoredTensor::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

const StoredTensor& WeightStore::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) fail(ErrorCode::kWeightShapeMismatch, "missing tensor " + name);
  return it->second;
}

nn::ConvLayer<float> WeightStore::conv(const std::string& prefix,
                                       const nn::ConvSpec& spec) const {
  const auto& w = at(prefix + ".w");
  const auto& b = at(prefix + ".b");
  const std::vector<std::uint32_t> want{u32(spec.out_channels), u32(spec.in_channels),
                                        u32(spec.kernel_size), u32(spec.kernel_size)};
  if (w.dims != want || b.dims != std::vector<std::uint32_t>{u32(spec.out_channels)}) {
    fail(ErrorCode::kWeightShapeMismatch,
         prefix + " has " + dims_string(w.dims) + ", expected " + dims_string(want));
  }
  nn::ConvLayer<float> layer;
  layer.spec = spec;
  layer.weights = Eigen::Map<const RowMatrixf>(w.values.data(), spec.out_channels,
                                               spec.fan_in());
  layer.bias = Eigen::Map<const Vectorf>(b.values.data(), spec.out_channels);
  return layer;
}

nn::DenseLayer<float> WeightStore::dense(const std::string& prefix, int out,
                                         int in) const {
  const auto& w = at(prefix + ".w");
  const auto& b = at(prefix + ".b");
  if (w.dims != std::vector<std::uint32_t>{u32(out), u32(in)} ||
      b.dims != std::vector<std::uint32_t>{u32(out)}) {
    fail(ErrorCode::kWeightShapeMismatch, prefix + " has " + dims_string(w.dims));
  }
  nn::DenseLayer<float> layer;
  layer.weights = Eigen::Map<const RowMatrixf>(w.values.data(), out, in);
  layer.bias = Eigen::Map<const Vectorf>(b.values.data(), out);
  return layer;
}

std::map<std::string, std::vector<std::uint32_t>> expected_inventory(
    ModelKind kind, int levels, int latent_dim) {
  std::map<std::string, std::vector<std::uint32_t>> inv;
  switch (kind) {
    case ModelKind::kGenerator:
      for (int k = 0; k < levels; ++k) {
        for (const auto& e : arch::band_encoder(k)) add_conv(inv, e);
        for (const auto& e : arch::band_generator(k)) add_conv(inv, e);
      }
      for (const auto& e : arch::residual_encoder(levels)) add_conv(inv, e);
      for (const auto& e : arch::residual_generator(levels)) add_conv(inv, e);
      for (const auto& e : arch::smn_encoder(latent_dim)) add_dense(inv, e);
      for (const auto& e : arch::smn_decoder_trunk(latent_dim)) add_dense(inv, e);
      for (const auto& e : arch::smn_heads(levels)) add_dense(inv, e);
      inv["bp.sigma"] = {u32(levels)};
      break;
    case ModelKind::kDiscriminator:
      for (int k = 0; k <= levels; ++k)
        for (const auto& e : arch::disc_stack(k)) add_conv(inv, e);
      break;
    case ModelKind::kFeatureExtractor:
      for (const auto& e : arch::feature_stages(levels)) add_conv(inv, e);
      break;
  }
  return inv;
}

std::vector<std::uint8_t> save(const WeightStore& store) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(store.kind));
  w.u8(static_cast<std::uint8_t>(store.levels));
  w.u16(static_cast<std::uint16_t>(store.latent_dim));
  w.u32(static_cast<std::uint32_t>(store.tensors.size()));

  std::size_t table = kHeaderBytes;
  for (const auto& [name, t] : store.tensors) {
    table += 2 + name.size() + 1 + 4 * t.dims.size() + 8;
  }
  auto align = [](std::size_t v) { return (v + kAlign - 1) / kAlign * kAlign; };

  std::vector<std::uint64_t> offsets;
  std::size_t cursor = align(table);
  for (const auto& [name, t] : store.tensors) {
    if (t.values.size() != t.element_count()) {
      fail(ErrorCode::kShapeMismatch, name + " holds " +
                                          std::to_string(t.values.size()) +
                                          " values for dims " + dims_string(t.dims));
    }
    offsets.push_back(cursor);
    cursor = align(cursor + 4 * t.values.size());
  }

  std::size_t i = 0;
  for (const auto& [name, t] : store.tensors) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.u32(d);
    w.u64(offsets[i++]);
  }
  i = 0;
  for (const auto& [name, t] : store.tensors) {
    w.pad_to(offsets[i++]);
    for (float v : t.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      w.u32(bits);
    }
  }
  return w.take();
}

WeightStore load(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorCode::kBadMagic, "not a GSW1 file");
  }
  Reader r(bytes);
  r.str(4, "magic");
  const auto version = r.uint(4, "header");
  if (version != kVersion) {
    fail(ErrorCode::kBadMagic, "unsupported version " + std::to_string(version));
  }
  WeightStore store;
  const auto kind = r.uint(1, "header");
  if (kind < 1 || kind > 3) {
    fail(ErrorCode::kUnknownModelKind, "model kind " + std::to_string(kind));
  }
  store.kind = static_cast<ModelKind>(kind);
  store.levels = static_cast<int>(r.uint(1, "header"));
  store.latent_dim = static_cast<int>(r.uint(2, "header"));
  const auto count = r.uint(4, "header");

  struct Entry {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::uint64_t offset;
  };
  std::vector<Entry> entries;
  for (std::uint64_t i = 0; i < count; ++i) {
    Entry e;
    const auto len = r.uint(2, "tensor table");
    e.name = r.str(len, "tensor table");
    const auto rank = r.uint(1, "tensor table");
    for (std::uint64_t d = 0; d < rank; ++d) {
      e.dims.push_back(static_cast<std::uint32_t>(r.uint(4, "tensor table")));
    }
    e.offset = r.uint(8, "tensor table");
    entries.push_back(std::move(e));
  }
  const std::size_t table_end = r.pos();

  std::vector<std::pair<std::uint64_t, std::uint64_t>> extents;
  for (auto& e : entries) {
    StoredTensor t;
    t.dims = e.dims;
    const std::uint64_t n = t.element_count();
    const std::uint64_t end = e.offset + 4 * n;
    if (e.offset < table_end || e.offset % kAlign != 0) {
      fail(ErrorCode::kShapeMismatch, e.name + ": payload offset " +
                                          std::to_string(e.offset) + " is invalid");
    }
    if (end > bytes.size()) {
      fail(ErrorCode::kTruncatedPayload,
           e.name + ": needs bytes up to " + std::to_string(end) + ", file has " +
               std::to_string(bytes.size()));
    }
    extents.emplace_back(e.offset, end);
    t.values.resize(n);
    for (std::uint64_t j = 0; j < n; ++j) {
      const std::uint8_t* p = bytes.data() + e.offset + 4 * j;
      const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                                 (static_cast<std::uint32_t>(p[1]) << 8) |
                                 (static_cast<std::uint32_t>(p[2]) << 16) |
                                 (static_cast<std::uint32_t>(p[3]) << 24);
      std::memcpy(&t.values[j], &bits, 4);
    }
    if (!store.tensors.emplace(e.name, std::move(t)).second) {
      fail(ErrorCode::kShapeMismatch, e.name + ": duplicate tensor name");
    }
  }
  std::sort(extents.begin(), extents.end());
  for (std::size_t i = 1; i < extents.size(); ++i) {
    if (extents[i].first < extents[i - 1].second) {
      fail(ErrorCode::kShapeMismatch, "overlapping tensor payloads");
    }
  }

  const auto want = expected_inventory(store.kind, store.levels, store.latent_dim);
  for (const auto& [name, t] : store.tensors) {
    auto it = want.find(name);
    if (it == want.end()) {
      fail(ErrorCode::kShapeMismatch, name + ": not part of the " +
                                          std::string(model_kind_name(store.kind)) +
                                          " layout");
    }
    if (it->second != t.dims) {
      fail(ErrorCode::kShapeMismatch, name + ": dims " + dims_string(t.dims) +
                                          ", expected " + dims_string(it->second));
    }
  }
  for (const auto& [name, dims] : want) {
    if (!store.tensors.count(name)) fail(ErrorCode::kShapeMismatch, name + ": missing");
  }
  return store;
}

void save_file(const WeightStore& store, const std::filesystem::path& path) {
  const auto bytes = save(store);
  write_file_atomic(path, std::span<const std::uint8_t>(bytes));
}

WeightStore load_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return load(bytes);
}

WeightStore init_random(ModelKind kind, int levels, int latent_dim,
                        std::uint64_t seed) {
  WeightStore store;
  store.kind = kind;
  store.levels = levels;
  store.latent_dim = kind == ModelKind::kGenerator ? latent_dim : 0;
  std::mt19937_64 rng(seed);
  // Name order, so the byte stream only depends on the seed.
  for (const auto& [name, dims] : expected_inventory(kind, levels, store.latent_dim)) {
    StoredTensor t;
    t.dims = dims;
    t.values.assign(t.element_count(), 0.0f);
    if (name == "bp.sigma") {
      std::fill(t.values.begin(), t.values.end(), kPlaceholderSigma);
    } else if (name.ends_with(".w")) {
      std::normal_distribution<float> normal(
          0.0f, std::sqrt(2.0f / static_cast<float>(fan_in(dims))));
      for (auto& v : t.values) v = normal(rng);
    }
    store.tensors.emplace(name, std::move(t));
  }
  return store;
}

std::string inspect(const WeightStore& store) {
  std::ostringstream os;
  os << "GSW1 version " << kVersion << " kind " << model_kind_name(store.kind)
     << " K " << store.levels << " d_s " << store.latent_dim << " tensors "
     << store.tensors.size() << '\n';
  os << std::setprecision(6);
  for (const auto& [name, t] : store.tensors) {
    os << name << ' ' << dims_string(t.dims);
    if (!t.values.empty()) {
      const auto [lo, hi] = std::minmax_element(t.values.begin(), t.values.end());
      double sum = 0.0;
      for (float v : t.values) sum += v;
      os << " min " << *lo << " max " << *hi << " mean "
         << sum / static_cast<double>(t.values.size());
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace lpstain
