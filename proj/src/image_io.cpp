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

#include "lpstain/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstring>

#include "json.hpp"
#include "lpstain/fsutil.hpp"

namespace lpstain {
namespace {

std::string level_file(int k) { return "level" + std::to_string(k) + ".png"; }

// Quantized pixels of one level, already mapped to [0, 1] by the affine.
Imagef level_image(const Tensorf& t, const LevelAffine& a) {
  Tensorf stored(((t.matrix().array().cast<double>() - a.offset) / a.scale)
                     .cast<float>()
                     .matrix(),
                 t.height(), t.width());
  return Imagef(std::move(stored), RangeTag::kUnit);
}

Tensorf level_values(const Imagef& img, const LevelAffine& a) {
  return Tensorf((img.pixels.matrix().array().cast<double>() * a.scale + a.offset)
                     .cast<float>()
                     .matrix(),
                 img.height(), img.width());
}

LevelAffine range_affine(RangeTag range) {
  return range == RangeTag::kUnit ? LevelAffine{1.0, 0.0} : LevelAffine{2.0, -1.0};
}

}  // namespace

Imagef decode_png(std::span<const std::uint8_t> bytes, const std::string& name) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    fail(ErrorCode::kUnreadableImage, name + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    fail(ErrorCode::kUnreadableImage, name + ": " + image.message);
  }
  const int h = static_cast<int>(image.height);
  const int w = static_cast<int>(image.width);
  Tensorf t(3, h, w);
  const Eigen::Index n = static_cast<Eigen::Index>(h) * w;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) t.matrix()(c, i) = buffer[3 * i + c] / 255.0f;
  }
  return Imagef(std::move(t), RangeTag::kUnit);
}

Imagef read_png(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const Error&) {
    fail(ErrorCode::kUnreadableImage, path.string() + ": cannot open");
  }
  return decode_png(bytes, path.string());
}

std::vector<std::uint8_t> encode_png(const Imagef& img) {
  const Imagef unit = to_unit(img);
  const int h = unit.height();
  const int w = unit.width();
  const Eigen::Index n = static_cast<Eigen::Index>(h) * w;
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(3 * n));
  const int old_mode = std::fegetround();
  std::fesetround(FE_TONEAREST);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const float v = std::clamp(unit.pixels.matrix()(c, i), 0.0f, 1.0f);
      pixels[3 * i + c] = static_cast<std::uint8_t>(std::nearbyint(v * 255.0f));
    }
  }
  std::fesetround(old_mode);

  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    fail(ErrorCode::kIo, std::string("png encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    fail(ErrorCode::kIo, std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

void write_png(const std::filesystem::path& path, const Imagef& img) {
  const auto bytes = encode_png(img);
  write_file_atomic(path, std::span<const std::uint8_t>(bytes));
}

std::string sidecar_json(const PyramidSidecar& s) {
  nlohmann::ordered_json j;
  j["format"] = "lpstain-pyramid";
  j["K"] = s.levels;
  j["range_tag"] = std::string(range_name(s.range));
  if (s.sigma) j["sigma"] = *s.sigma;
  j["levels"] = nlohmann::ordered_json::array();
  for (const auto& r : s.records) {
    nlohmann::ordered_json l;
    l["level"] = r.level;
    l["kind"] = r.residual ? "residual" : "bandpass";
    l["file"] = r.file;
    l["height"] = r.height;
    l["width"] = r.width;
    l["scale"] = r.affine.scale;
    l["offset"] = r.affine.offset;
    j["levels"].push_back(std::move(l));
  }
  return j.dump(2) + "\n";
}

PyramidSidecar parse_sidecar(const std::string& text) {
  PyramidSidecar s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.levels = j.at("K").get<int>();
    s.range = parse_range(j.at("range_tag").get<std::string>());
    if (j.contains("sigma")) s.sigma = j.at("sigma").get<std::vector<double>>();
    for (const auto& l : j.at("levels")) {
      PyramidLevelRecord r;
      r.level = l.at("level").get<int>();
      r.residual = l.at("kind").get<std::string>() == "residual";
      r.file = l.at("file").get<std::string>();
      r.height = l.at("height").get<int>();
      r.width = l.at("width").get<int>();
      r.affine.scale = l.at("scale").get<double>();
      r.affine.offset = l.at("offset").get<double>();
      s.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kBadSidecar, e.what());
  }
  if (s.levels < 1 || s.records.size() != static_cast<std::size_t>(s.levels + 1)) {
    fail(ErrorCode::kBadSidecar, "expected K+1 level records");
  }
  for (int k = 0; k <= s.levels; ++k) {
    const auto& r = s.records[k];
    if (r.level != k || r.residual != (k == s.levels) || !(r.affine.scale > 0.0) ||
        r.file.empty() || r.file.find('/') != std::string::npos) {
      fail(ErrorCode::kBadSidecar, "malformed record for level " + std::to_string(k));
    }
  }
  return s;
}

PyramidSidecar write_pyramid(const std::filesystem::path& dir,
                             const LaplacianPyramid<float>& lp,
                             const std::optional<std::vector<double>>& sigma) {
  PyramidSidecar s;
  s.levels = lp.levels();
  s.range = lp.range;
  s.sigma = sigma;
  std::filesystem::create_directories(dir);
  for (int k = 0; k <= lp.levels(); ++k) {
    const bool residual = k == lp.levels();
    const Tensorf& t = residual ? lp.residual : lp.bandpass[k];
    LevelAffine a = range_affine(lp.range);
    if (!residual) {
      double peak = t.matrix().cwiseAbs().maxCoeff();
      if (!(peak > 0.0)) peak = 1.0;
      a = LevelAffine{2.0 * peak, -peak};
    }
    write_png(dir / level_file(k), level_image(t, a));
    s.records.push_back({k, residual, level_file(k), t.height(), t.width(), a});
  }
  write_file_atomic(dir / kSidecarName, sidecar_json(s));
  return s;
}

LaplacianPyramid<float> read_pyramid(const std::filesystem::path& dir_or_sidecar,
                                     PyramidSidecar* sidecar_out) {
  std::filesystem::path sidecar_path = dir_or_sidecar;
  if (std::filesystem::is_directory(sidecar_path)) sidecar_path /= kSidecarName;
  if (!std::filesystem::is_regular_file(sidecar_path)) {
    fail(ErrorCode::kBadSidecar, "missing " + sidecar_path.string());
  }
  const auto bytes = read_file(sidecar_path);
  PyramidSidecar s = parse_sidecar(std::string(bytes.begin(), bytes.end()));
  const auto dir = sidecar_path.parent_path();

  LaplacianPyramid<float> lp;
  lp.range = s.range;
  for (const auto& r : s.records) {
    const auto file = dir / r.file;
    if (!std::filesystem::is_regular_file(file)) {
      fail(ErrorCode::kBadSidecar, "missing level file " + file.string());
    }
    const Imagef img = read_png(file);
    if (img.height() != r.height || img.width() != r.width) {
      fail(ErrorCode::kDimMismatch, file.string() + " is " + std::to_string(img.height()) +
                                        "x" + std::to_string(img.width()) +
                                        ", sidecar says " + std::to_string(r.height) + "x" +
                                        std::to_string(r.width));
    }
    Tensorf values = level_values(img, r.affine);
    if (r.residual) {
      lp.residual = std::move(values);
    } else {
      lp.bandpass.push_back(std::move(values));
    }
  }
  for (int k = 0; k < lp.levels(); ++k) {
    const Tensorf& lower = k + 1 < lp.levels() ? lp.bandpass[k + 1] : lp.residual;
    if ((lp.bandpass[k].height() + 1) / 2 != lower.height() ||
        (lp.bandpass[k].width() + 1) / 2 != lower.width()) {
      fail(ErrorCode::kDimMismatch, "level " + std::to_string(k) +
                                        " is not the parent of level " +
                                        std::to_string(k + 1));
    }
  }
  if (sidecar_out) *sidecar_out = std::move(s);
  return lp;
}

BPScales<float> compute_bp_scales(std::span<const std::filesystem::path> image_paths,
                                  const PyramidConfig<float>& cfg) {
  if (image_paths.empty()) fail(ErrorCode::kEmptyDataset, "no images");
  std::vector<Imagef> images;
  images.reserve(image_paths.size());
  for (const auto& p : image_paths) images.push_back(to_symmetric(read_png(p)));
  return compute_bp_scales(std::span<const Imagef>(images), cfg);
}

std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(dir)) {
    fail(ErrorCode::kIo, dir.string() + " is not a directory");
  }
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace lpstain
