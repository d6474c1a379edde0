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

#include <vector>

#include "dcount/model.hpp"
#include "dcount/reference.hpp"

namespace dcount::testing {

// Double-precision copy of a model's weights and biases.
struct DoubleParams {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  explicit DoubleParams(const FcnModel& m) {
    for (const auto& c : m.convs()) {
      weights.emplace_back(c.weights.values().begin(), c.weights.values().end());
      bias.emplace_back(c.bias.begin(), c.bias.end());
    }
  }
};

// Forward pass of the whole chain built from the serial reference kernels,
// in double, including the input offset and grayscale replication.
inline std::vector<double> reference_forward(const ArchitectureSpec& spec, const DoubleParams& p, const Tensor& image,
                                             std::size_t* out_h = nullptr, std::size_t* out_w = nullptr) {
  std::size_t c = spec.input_channels(), h = image.height(), w = image.width();
  std::vector<double> x;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const std::size_t src = image.channels() == 1 ? 0 : ch;
    for (std::size_t i = 0; i < h * w; ++i) x.push_back(double(image[src * h * w + i]) - kInputOffset);
  }
  std::size_t conv = 0;
  for (const auto& l : spec.layers) {
    if (l.kind == LayerSpec::Kind::max_pool) {
      auto pooled = reference::maxpool2(x, c, h, w);
      x = std::move(pooled.values);
      h = pooled.height;
      w = pooled.width;
      continue;
    }
    x = reference::conv2d_forward(x, c, h, w, p.weights[conv], p.bias[conv], l.out_channels, l.kernel);
    if (l.relu) x = reference::relu(x);
    c = l.out_channels;
    ++conv;
  }
  if (out_h) *out_h = h;
  if (out_w) *out_w = w;
  return x;
}

// sum((out - target)^2) / 2 in double.
inline double reference_loss(const ArchitectureSpec& spec, const DoubleParams& p, const Tensor& image,
                             const std::vector<double>& target) {
  const auto out = reference_forward(spec, p, image);
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += (out[i] - target[i]) * (out[i] - target[i]);
  return 0.5 * s;
}

}  // namespace dcount::testing
