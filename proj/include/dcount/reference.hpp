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
#pragma once

// Serial, loop-for-loop reference versions of the kernels in kernels.hpp.
// Templated on the scalar so tests can run them in double precision as an
// oracle; the benchmark times them against the parallel kernels.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace dcount::reference {

// in: (channels, height, width); weights: (out, channels, k, k).
template <typename T>
std::vector<T> conv2d_forward(const std::vector<T>& in, std::size_t channels, std::size_t height, std::size_t width,
                              const std::vector<T>& weights, const std::vector<T>& bias, std::size_t out_channels,
                              std::size_t k) {
  const auto pad = static_cast<long>(k / 2);
  std::vector<T> out(out_channels * height * width, T(0));
  for (std::size_t o = 0; o < out_channels; ++o) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        T acc = bias[o];
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t dy = 0; dy < k; ++dy) {
            for (std::size_t dx = 0; dx < k; ++dx) {
              const long iy = static_cast<long>(y + dy) - pad;
              const long ix = static_cast<long>(x + dx) - pad;
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(height) || ix >= static_cast<long>(width)) continue;
              acc += weights[((o * channels + c) * k + dy) * k + dx] * in[(c * height + iy) * width + ix];
            }
          }
        }
        out[(o * height + y) * width + x] = acc;
      }
    }
  }
  return out;
}

template <typename T>
struct ConvGradients {
  std::vector<T> weights;
  std::vector<T> bias;
  std::vector<T> input;
};

template <typename T>
ConvGradients<T> conv2d_backward(const std::vector<T>& in, std::size_t channels, std::size_t height,
                                 std::size_t width, const std::vector<T>& weights, std::size_t out_channels,
                                 std::size_t k, const std::vector<T>& upstream) {
  const auto pad = static_cast<long>(k / 2);
  ConvGradients<T> g{std::vector<T>(weights.size(), T(0)), std::vector<T>(out_channels, T(0)),
                     std::vector<T>(in.size(), T(0))};
  for (std::size_t o = 0; o < out_channels; ++o) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const T up = upstream[(o * height + y) * width + x];
        g.bias[o] += up;
        for (std::size_t c = 0; c < channels; ++c) {
          for (std::size_t dy = 0; dy < k; ++dy) {
            for (std::size_t dx = 0; dx < k; ++dx) {
              const long iy = static_cast<long>(y + dy) - pad;
              const long ix = static_cast<long>(x + dx) - pad;
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(height) || ix >= static_cast<long>(width)) continue;
              const std::size_t wi = ((o * channels + c) * k + dy) * k + dx;
              const std::size_t ii = (c * height + iy) * width + ix;
              g.weights[wi] += up * in[ii];
              g.input[ii] += up * weights[wi];
            }
          }
        }
      }
    }
  }
  return g;
}

template <typename T>
std::vector<T> relu(const std::vector<T>& in) {
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
  return out;
}

template <typename T>
std::vector<T> relu_backward(const std::vector<T>& in, const std::vector<T>& upstream) {
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? upstream[i] : T(0);
  return out;
}

template <typename T>
struct PoolOutput {
  std::vector<T> values;
  std::vector<std::size_t> argmax;
  std::size_t height = 0;
  std::size_t width = 0;
};

template <typename T>
PoolOutput<T> maxpool2(const std::vector<T>& in, std::size_t channels, std::size_t height, std::size_t width) {
  PoolOutput<T> p;
  p.height = (height + 1) / 2;
  p.width = (width + 1) / 2;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t oy = 0; oy < p.height; ++oy) {
      for (std::size_t ox = 0; ox < p.width; ++ox) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_i = 0;
        for (std::size_t y = 2 * oy; y < std::min(2 * oy + 2, height); ++y) {
          for (std::size_t x = 2 * ox; x < std::min(2 * ox + 2, width); ++x) {
            const std::size_t i = (c * height + y) * width + x;
            if (in[i] > best) {
              best = in[i];
              best_i = i;
            }
          }
        }
        p.values.push_back(best);
        p.argmax.push_back(best_i);
      }
    }
  }
  return p;
}

template <typename T>
std::vector<T> maxpool2_backward(std::size_t input_size, const std::vector<std::size_t>& argmax,
                                 const std::vector<T>& upstream) {
  std::vector<T> g(input_size, T(0));
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += upstream[i];
  return g;
}

}  // namespace dcount::reference
