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

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lpstain/tensor.hpp"

namespace lpstain::nn {

inline constexpr float kLeakySlope = 0.2f;
inline constexpr float kNormEps = 1e-5f;

struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel_size = 3;
  int stride = 1;

  int padding() const { return kernel_size / 2; }
  int fan_in() const { return in_channels * kernel_size * kernel_size; }
  int output_extent(int n) const {
    return (n + 2 * padding() - kernel_size) / stride + 1;
  }
};

/// Convolution weights as an `out x (in*k*k)` matrix; column order is
/// (in_channel, ky, kx), matching an (out, in, k, k) tensor flattened
/// row-major.
template <typename Scalar>
struct ConvLayer {
  ConvSpec spec;
  RowMatrix<Scalar> weights;
  Vector<Scalar> bias;
};

template <typename Scalar>
struct DenseLayer {
  RowMatrix<Scalar> weights;  // out x in
  Vector<Scalar> bias;
};

template <typename Scalar>
struct ResBlockWeights {
  ConvLayer<Scalar> conv0;  // in -> out
  ConvLayer<Scalar> conv1;  // out -> out
  std::optional<ConvLayer<Scalar>> skip;  // 1x1 projection when in != out

  int in_channels() const { return conv0.spec.in_channels; }
  int out_channels() const { return conv1.spec.out_channels; }
};

/// Target per-channel mean (alpha) and standard deviation (beta).
template <typename Scalar>
struct AdaINParams {
  Vector<Scalar> alpha;
  Vector<Scalar> beta;
};

namespace detail {

// Output rows per im2col block, chosen so a block spans ~8k pixels.
inline int rows_per_block(int out_width) {
  return std::max(1, 8192 / std::max(1, out_width));
}

inline int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace detail

/// Dense cross-correlation with reflect padding k/2.
///
/// Output is same-size at stride 1 and ceil-halved at stride 2. The work is
/// split into fixed row blocks (independent of threading), each lowered to
/// one GEMM.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const ConvSpec& spec,
                      const RowMatrix<Scalar>& weights,
                      const Vector<Scalar>& bias) {
  if (x.channels() != spec.in_channels) {
    fail(ErrorCode::kShapeMismatch,
         "conv2d expects " + std::to_string(spec.in_channels) +
             " input channels, got " + x.shape_string());
  }
  if (weights.rows() != spec.out_channels || weights.cols() != spec.fan_in() ||
      bias.size() != spec.out_channels) {
    fail(ErrorCode::kShapeMismatch, "conv2d weight/bias shape");
  }
  const int h = x.height();
  const int w = x.width();
  const int k = spec.kernel_size;
  const int pad = spec.padding();
  const int ho = spec.output_extent(h);
  const int wo = spec.output_extent(w);
  Tensor<Scalar> out(spec.out_channels, ho, wo);

  if (k == 1 && spec.stride == 1) {
    out.matrix().noalias() = weights * x.matrix();
    out.matrix().colwise() += bias;
    return out;
  }

  // Source column for every (kx, ox).
  std::vector<int> xsrc(static_cast<std::size_t>(k) * wo);
  for (int kx = 0; kx < k; ++kx)
    for (int ox = 0; ox < wo; ++ox)
      xsrc[kx * wo + ox] = detail::reflect(ox * spec.stride + kx - pad, w);

  const int block = detail::rows_per_block(wo);
  RowMatrix<Scalar> cols;
  for (int oy0 = 0; oy0 < ho; oy0 += block) {
    const int rows = std::min(block, ho - oy0);
    const Eigen::Index n = static_cast<Eigen::Index>(rows) * wo;
    cols.resize(spec.fan_in(), n);
    for (int ci = 0; ci < spec.in_channels; ++ci) {
      const Scalar* plane = x.matrix().row(ci).data();
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          Scalar* dst = cols.row((ci * k + ky) * k + kx).data();
          const int* xs = &xsrc[kx * wo];
          for (int r = 0; r < rows; ++r) {
            const int iy = detail::reflect((oy0 + r) * spec.stride + ky - pad, h);
            const Scalar* src = plane + static_cast<Eigen::Index>(iy) * w;
            Scalar* d = dst + static_cast<Eigen::Index>(r) * wo;
            if (spec.stride == 1 && wo > 2 * pad) {
              // Interior columns are a contiguous shifted copy.
              for (int ox = 0; ox < pad; ++ox) d[ox] = src[xs[ox]];
              std::copy(src + kx, src + kx + (wo - 2 * pad), d + pad);
              for (int ox = wo - pad; ox < wo; ++ox) d[ox] = src[xs[ox]];
            } else {
              for (int ox = 0; ox < wo; ++ox) d[ox] = src[xs[ox]];
            }
          }
        }
      }
    }
    auto dst = out.matrix().middleCols(static_cast<Eigen::Index>(oy0) * wo, n);
    dst.noalias() = weights * cols;
    dst.colwise() += bias;
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const ConvLayer<Scalar>& layer) {
  return conv2d(x, layer.spec, layer.weights, layer.bias);
}

/// max(x, slope * x), elementwise.
template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& x, Scalar slope = kLeakySlope) {
  return Tensor<Scalar>(x.matrix().array().max(slope * x.matrix().array()).matrix(),
                        x.height(), x.width());
}

template <typename Scalar>
Vector<Scalar> leaky_relu(const Vector<Scalar>& v, Scalar slope = kLeakySlope) {
  return v.array().max(slope * v.array()).matrix();
}

/// Per-channel mean and population variance, accumulated sequentially in
/// double so the result does not depend on buffer alignment.
struct ChannelMoments {
  std::vector<double> mean;
  std::vector<double> variance;
};

template <typename Scalar>
ChannelMoments channel_moments(const Tensor<Scalar>& x) {
  ChannelMoments m;
  const Eigen::Index n = x.pixels();
  for (int c = 0; c < x.channels(); ++c) {
    const Scalar* p = x.matrix().row(c).data();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sum += p[i];
    const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
    double sq = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = p[i] - mean;
      sq += d * d;
    }
    m.mean.push_back(mean);
    m.variance.push_back(n > 0 ? sq / static_cast<double>(n) : 0.0);
  }
  return m;
}

namespace detail {

template <typename Scalar>
void require_spatial(const Tensor<Scalar>& x, const char* op) {
  if (x.pixels() < 2) {
    fail(ErrorCode::kDegenerateChannel,
         std::string(op) + " needs >= 2 spatial elements, got " +
             x.shape_string());
  }
}

// (x - mean) / sqrt(var + eps) * gain + shift, per channel.
template <typename Scalar>
Tensor<Scalar> normalize_channels(const Tensor<Scalar>& x, Scalar eps,
                                  const Vector<Scalar>* gain,
                                  const Vector<Scalar>* shift) {
  const ChannelMoments m = channel_moments(x);
  Tensor<Scalar> out(x.channels(), x.height(), x.width());
  for (int c = 0; c < x.channels(); ++c) {
    const Scalar mean = static_cast<Scalar>(m.mean[c]);
    const Scalar inv = static_cast<Scalar>(1.0 / std::sqrt(m.variance[c] + eps));
    auto normalized = (x.matrix().row(c).array() - mean) * inv;
    if (gain != nullptr) {
      out.matrix().row(c) =
          (normalized * (*gain)(c) + (*shift)(c)).matrix();
    } else {
      out.matrix().row(c) = normalized.matrix();
    }
  }
  return out;
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> instance_norm(const Tensor<Scalar>& x, Scalar eps = kNormEps) {
  detail::require_spatial(x, "instance_norm");
  return detail::normalize_channels<Scalar>(x, eps, nullptr, nullptr);
}

/// Instance-normalizes, then imposes per-channel mean alpha and std beta.
template <typename Scalar>
Tensor<Scalar> adain(const Tensor<Scalar>& x, const AdaINParams<Scalar>& p,
                     Scalar eps = kNormEps) {
  if (p.alpha.size() != x.channels() || p.beta.size() != x.channels()) {
    fail(ErrorCode::kShapeMismatch,
         "adain params for " + std::to_string(p.alpha.size()) + "/" +
             std::to_string(p.beta.size()) + " channels on " +
             x.shape_string());
  }
  if (p.beta.size() > 0 && !(p.beta.minCoeff() > Scalar(0))) {
    fail(ErrorCode::kNonpositiveBeta, "adain beta must be > 0");
  }
  detail::require_spatial(x, "adain");
  return detail::normalize_channels<Scalar>(x, eps, &p.beta, &p.alpha);
}

/// Normalizes over every channel and spatial element of the instance.
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, Scalar eps = kNormEps) {
  const Eigen::Index n = x.size();
  const Scalar* p = x.data();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sum += p[i];
  const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
  double sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = p[i] - mean;
    sq += d * d;
  }
  const double var = n > 0 ? sq / static_cast<double>(n) : 0.0;
  const Scalar inv = static_cast<Scalar>(1.0 / std::sqrt(var + eps));
  return Tensor<Scalar>(
      ((x.matrix().array() - static_cast<Scalar>(mean)) * inv).matrix(),
      x.height(), x.width());
}

/// Two pre-norm stages (LayerNorm -> LeakyReLU -> conv) plus a skip path.
template <typename Scalar>
Tensor<Scalar> resblock(const Tensor<Scalar>& x, const ResBlockWeights<Scalar>& w,
                        Scalar slope = kLeakySlope) {
  Tensor<Scalar> y = conv2d(leaky_relu(layer_norm(x), slope), w.conv0);
  y = conv2d(leaky_relu(layer_norm(y), slope), w.conv1);
  if (w.skip) return conv2d(x, *w.skip) + y;
  return x + y;
}

/// Affine layers separated by LeakyReLU; the last layer stays linear.
template <typename Scalar>
Vector<Scalar> mlp(const Vector<Scalar>& v,
                   std::span<const DenseLayer<Scalar>> layers,
                   Scalar slope = kLeakySlope) {
  Vector<Scalar> cur = v;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (layer.weights.cols() != cur.size() ||
        layer.bias.size() != layer.weights.rows()) {
      fail(ErrorCode::kShapeMismatch,
           "mlp layer " + std::to_string(i) + " expects " +
               std::to_string(layer.weights.cols()) + " inputs, got " +
               std::to_string(cur.size()));
    }
    Vector<Scalar> next = layer.weights * cur + layer.bias;
    cur = (i + 1 < layers.size()) ? leaky_relu(next, slope) : std::move(next);
  }
  return cur;
}

template <typename Scalar>
Vector<Scalar> global_avg_pool(const Tensor<Scalar>& x) {
  const ChannelMoments m = channel_moments(x);
  Vector<Scalar> v(x.channels());
  for (int c = 0; c < x.channels(); ++c) v(c) = static_cast<Scalar>(m.mean[c]);
  return v;
}

template <typename Scalar>
Scalar softplus(Scalar x) {
  if (x > Scalar(20)) return x;
  return std::log1p(std::exp(x));
}

}  // namespace lpstain::nn
