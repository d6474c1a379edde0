/* Copyright 2026 The dcount Authors. All Rights Reserved.

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
#include "dcount/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include <Eigen/Core>

#include "dcount/errors.hpp"

namespace dcount::nn {
namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using StridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

// Spatial work is split into bands of whole output rows. Band size depends
// only on the problem shape, never on the thread count, so results are
// bit-identical for any OMP_NUM_THREADS.
constexpr std::size_t kBandColumns = 2048;
constexpr std::size_t kMaxPatchBuffer = std::size_t{1} << 22;

struct Bands {
  std::size_t rows;
  std::size_t count;
};

Bands plan_bands(std::size_t height, std::size_t width, std::size_t patch) {
  std::size_t rows = std::max<std::size_t>(1, kBandColumns / width);
  rows = std::min(rows, std::max<std::size_t>(1, kMaxPatchBuffer / (patch * width)));
  rows = std::min(rows, height);
  return {rows, (height + rows - 1) / rows};
}

// Patch matrix (C*k*k) x (rows*W) for output rows [y0, y0 + rows).
void im2col(const float* in, std::size_t channels, std::size_t height, std::size_t width, std::size_t k,
            std::size_t y0, std::size_t rows, float* col) {
  const long pad = static_cast<long>(k / 2);
  const std::size_t n = rows * width;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t dy = 0; dy < k; ++dy) {
      for (std::size_t dx = 0; dx < k; ++dx) {
        float* dst = col + ((c * k + dy) * k + dx) * n;
        const long shift = static_cast<long>(dx) - pad;
        const long x_lo = std::max<long>(0, -shift);
        const long x_hi = std::min<long>(static_cast<long>(width), static_cast<long>(width) - shift);
        for (std::size_t r = 0; r < rows; ++r) {
          float* row = dst + r * width;
          const long iy = static_cast<long>(y0 + r + dy) - pad;
          if (iy < 0 || iy >= static_cast<long>(height) || x_lo >= x_hi) {
            std::fill(row, row + width, 0.0f);
            continue;
          }
          const float* src = in + (c * height + static_cast<std::size_t>(iy)) * width;
          std::fill(row, row + x_lo, 0.0f);
          std::memcpy(row + x_lo, src + x_lo + shift, static_cast<std::size_t>(x_hi - x_lo) * sizeof(float));
          std::fill(row + x_hi, row + width, 0.0f);
        }
      }
    }
  }
}

void check_conv(const Tensor& input, const ConvLayerParams& params) {
  if (params.weights.rank() != 4 || params.weights.dim(2) != params.weights.dim(3)) {
    throw ConfigError("conv weights must be (out, in, k, k), got " + params.weights.shape_string());
  }
  if (params.kernel() % 2 == 0) {
    throw ConfigError("conv kernel size must be odd, got " + std::to_string(params.kernel()));
  }
  if (params.bias.size() != params.out_channels()) throw ConfigError("conv bias length does not match out channels");
  if (input.rank() != 3 || input.channels() != params.in_channels()) {
    throw ConfigError("conv input " + input.shape_string() + " does not match " +
                      std::to_string(params.in_channels()) + " input channels");
  }
}

// Weights for the transposed correlation that maps dOutput to dInput.
Tensor flipped_transpose(const Tensor& w) {
  const std::size_t out = w.dim(0), in = w.dim(1), k = w.dim(2);
  Tensor f({in, out, k, k});
  for (std::size_t o = 0; o < out; ++o)
    for (std::size_t c = 0; c < in; ++c)
      for (std::size_t dy = 0; dy < k; ++dy)
        for (std::size_t dx = 0; dx < k; ++dx)
          f[((c * out + o) * k + (k - 1 - dy)) * k + (k - 1 - dx)] = w[((o * in + c) * k + dy) * k + dx];
  return f;
}

Tensor correlate(const Tensor& input, const Tensor& weights, const float* bias) {
  const std::size_t channels = input.channels(), height = input.height(), width = input.width();
  const std::size_t out_channels = weights.dim(0), k = weights.dim(2);
  const std::size_t patch = channels * k * k;
  const std::size_t plane = height * width;
  Tensor out = Tensor::chw(out_channels, height, width);
  const Bands bands = plan_bands(height, width, patch);
  const ConstMatrixMap w(weights.raw(), static_cast<Eigen::Index>(out_channels), static_cast<Eigen::Index>(patch));

#pragma omp parallel
  {
    std::vector<float> col(k == 1 ? 0 : patch * bands.rows * width);
#pragma omp for schedule(static)
    for (std::size_t b = 0; b < bands.count; ++b) {
      const std::size_t y0 = b * bands.rows;
      const std::size_t rows = std::min(bands.rows, height - y0);
      const auto n = static_cast<Eigen::Index>(rows * width);
      StridedMap dst(out.raw() + y0 * width, static_cast<Eigen::Index>(out_channels), n,
                     Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
      if (k == 1) {
        const ConstStridedMap src(input.raw() + y0 * width, static_cast<Eigen::Index>(channels), n,
                                  Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
        dst.noalias() = w * src;
      } else {
        im2col(input.raw(), channels, height, width, k, y0, rows, col.data());
        const ConstMatrixMap src(col.data(), static_cast<Eigen::Index>(patch), n);
        dst.noalias() = w * src;
      }
      if (bias != nullptr) {
        for (std::size_t o = 0; o < out_channels; ++o) dst.row(static_cast<Eigen::Index>(o)).array() += bias[o];
      }
    }
  }
  return out;
}

}  // namespace

ConvLayerParams ConvLayerParams::zeros(std::size_t out_channels, std::size_t in_channels, std::size_t kernel) {
  ConvLayerParams p;
  p.weights = Tensor({out_channels, in_channels, kernel, kernel});
  p.bias.assign(out_channels, 0.0f);
  p.weight_velocity = Tensor({out_channels, in_channels, kernel, kernel});
  p.bias_velocity.assign(out_channels, 0.0f);
  return p;
}

Tensor conv2d_forward(const Tensor& input, const ConvLayerParams& params) {
  check_conv(input, params);
  return correlate(input, params.weights, params.bias.data());
}

ConvGrads conv2d_backward(const Tensor& input, const ConvLayerParams& params, const Tensor& upstream,
                          bool want_input_grad) {
  check_conv(input, params);
  const std::size_t channels = input.channels(), height = input.height(), width = input.width();
  const std::size_t out_channels = params.out_channels(), k = params.kernel();
  if (upstream.rank() != 3 || upstream.channels() != out_channels || upstream.height() != height ||
      upstream.width() != width) {
    throw ConfigError("conv upstream gradient " + upstream.shape_string() + " does not match output dims");
  }
  const std::size_t patch = channels * k * k;
  const std::size_t plane = height * width;

  ConvGrads g;
  g.bias.assign(out_channels, 0.0f);
#pragma omp parallel for schedule(static)
  for (std::size_t o = 0; o < out_channels; ++o) {
    double s = 0.0;
    const float* up = upstream.raw() + o * plane;
    for (std::size_t i = 0; i < plane; ++i) s += up[i];
    g.bias[o] = static_cast<float>(s);
  }

  const Bands bands = plan_bands(height, width, patch);
  std::vector<RowMatrix> partial(bands.count);
#pragma omp parallel
  {
    std::vector<float> col(k == 1 ? 0 : patch * bands.rows * width);
#pragma omp for schedule(static)
    for (std::size_t b = 0; b < bands.count; ++b) {
      const std::size_t y0 = b * bands.rows;
      const std::size_t rows = std::min(bands.rows, height - y0);
      const auto n = static_cast<Eigen::Index>(rows * width);
      const ConstStridedMap up(upstream.raw() + y0 * width, static_cast<Eigen::Index>(out_channels), n,
                               Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
      if (k == 1) {
        const ConstStridedMap src(input.raw() + y0 * width, static_cast<Eigen::Index>(channels), n,
                                  Eigen::OuterStride<>(static_cast<Eigen::Index>(plane)));
        partial[b].noalias() = up * src.transpose();
      } else {
        im2col(input.raw(), channels, height, width, k, y0, rows, col.data());
        const ConstMatrixMap src(col.data(), static_cast<Eigen::Index>(patch), n);
        partial[b].noalias() = up * src.transpose();
      }
    }
  }
  g.weights = Tensor(params.weights.dims());
  Eigen::Map<RowMatrix> gw(g.weights.raw(), static_cast<Eigen::Index>(out_channels),
                           static_cast<Eigen::Index>(patch));
  gw = partial[0];
  for (std::size_t b = 1; b < bands.count; ++b) gw += partial[b];

  if (want_input_grad) g.input = correlate(upstream, flipped_transpose(params.weights), nullptr);
  return g;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  relu_inplace(out);
  return out;
}

void relu_inplace(Tensor& t) {
  float* p = t.raw();
  const std::size_t n = t.size();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) p[i] = p[i] > 0.0f ? p[i] : 0.0f;
}

Tensor relu_backward(const Tensor& forward_value, const Tensor& upstream) {
  if (!forward_value.same_shape(upstream)) throw ConfigError("relu backward shape mismatch");
  Tensor g(upstream.dims());
  const float* v = forward_value.raw();
  const float* u = upstream.raw();
  float* out = g.raw();
  const std::size_t n = g.size();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) out[i] = v[i] > 0.0f ? u[i] : 0.0f;
  return g;
}

PoolResult maxpool2(const Tensor& input) {
  if (input.rank() != 3 || input.height() < 1 || input.width() < 1) {
    throw ConfigError("maxpool2 needs a non-empty CxHxW input, got " + input.shape_string());
  }
  const std::size_t channels = input.channels(), height = input.height(), width = input.width();
  const std::size_t oh = (height + 1) / 2, ow = (width + 1) / 2;
  PoolResult r{Tensor::chw(channels, oh, ow), std::vector<std::uint32_t>(channels * oh * ow)};
  const float* in = input.raw();
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const std::size_t y_end = std::min(2 * oy + 2, height);
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t x_end = std::min(2 * ox + 2, width);
        std::size_t best = (c * height + 2 * oy) * width + 2 * ox;
        for (std::size_t y = 2 * oy; y < y_end; ++y) {
          for (std::size_t x = 2 * ox; x < x_end; ++x) {
            const std::size_t i = (c * height + y) * width + x;
            if (in[i] > in[best]) best = i;
          }
        }
        const std::size_t o = (c * oh + oy) * ow + ox;
        r.output[o] = in[best];
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

Tensor maxpool2_backward(const std::vector<std::size_t>& input_dims, const std::vector<std::uint32_t>& argmax,
                         const Tensor& upstream) {
  if (argmax.size() != upstream.size()) throw ConfigError("maxpool2 backward: argmax/upstream size mismatch");
  Tensor g(input_dims);
  // Windows are disjoint, so each input element receives at most one write.
  const std::size_t n = argmax.size();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) g[argmax[i]] = upstream[i];
  return g;
}

Tensor gaussian_init(const std::vector<std::size_t>& dims, float stddev, std::uint64_t seed) {
  if (!(stddev > 0.0f) || !std::isfinite(stddev)) {
    throw ConfigError("gaussian_init: stddev must be positive, got " + std::to_string(stddev));
  }
  Tensor t(dims);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, stddev);
  for (float& v : t.storage()) v = normal(rng);
  return t;
}

void sgd_step(ConvLayerParams& params, const ConvGrads& grads, const SgdSettings& s) {
  if (!grads.weights.same_shape(params.weights) || !params.weight_velocity.same_shape(params.weights) ||
      grads.bias.size() != params.bias.size() || params.bias_velocity.size() != params.bias.size()) {
    throw ConfigError("sgd_step: parameter, gradient and velocity shapes disagree");
  }
  const auto update = [&s](float* p, float* v, const float* g, std::size_t n) {
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = s.momentum * v[i] + s.learning_rate * (g[i] + s.weight_decay * p[i]);
      p[i] -= v[i];
    }
  };
  update(params.weights.raw(), params.weight_velocity.raw(), grads.weights.raw(), params.weights.size());
  update(params.bias.data(), params.bias_velocity.data(), grads.bias.data(), params.bias.size());
}

}  // namespace dcount::nn
