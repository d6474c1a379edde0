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

#include <cstdint>
#include <vector>

#include "dcount/tensor.hpp"

// OpenMP-parallel numeric kernels used by the model and trainer. Each has a
// serial counterpart in dcount/reference.hpp that the tests and the
// benchmark compare against.
namespace dcount::nn {

// Weights (out, in, k, k) with k odd, a bias per output channel, and the
// heavy-ball velocity buffers the optimizer keeps for both.
struct ConvLayerParams {
  Tensor weights;
  std::vector<float> bias;
  Tensor weight_velocity;
  std::vector<float> bias_velocity;

  static ConvLayerParams zeros(std::size_t out_channels, std::size_t in_channels, std::size_t kernel);

  std::size_t out_channels() const { return weights.dim(0); }
  std::size_t in_channels() const { return weights.dim(1); }
  std::size_t kernel() const { return weights.dim(2); }
  std::size_t param_count() const { return weights.size() + bias.size(); }
};

struct ConvGrads {
  Tensor weights;
  std::vector<float> bias;
  Tensor input;  // empty when not requested
};

// Same-padded (zero) stride-1 cross-correlation: output is C'xHxW.
Tensor conv2d_forward(const Tensor& input, const ConvLayerParams& params);

// Analytic gradients of conv2d_forward given dLoss/dOutput.
ConvGrads conv2d_backward(const Tensor& input, const ConvLayerParams& params, const Tensor& upstream,
                          bool want_input_grad = true);

Tensor relu(const Tensor& input);
void relu_inplace(Tensor& t);
// Gradient passes where the forward input (or, equivalently, output) is > 0.
Tensor relu_backward(const Tensor& forward_value, const Tensor& upstream);

struct PoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

// Non-overlapping 2x2 max pool with ceil output dims; ties go to the first
// element in row-major order.
PoolResult maxpool2(const Tensor& input);
Tensor maxpool2_backward(const std::vector<std::size_t>& input_dims, const std::vector<std::uint32_t>& argmax,
                         const Tensor& upstream);

// i.i.d. N(0, stddev^2) from a seeded mt19937_64 stream.
Tensor gaussian_init(const std::vector<std::size_t>& dims, float stddev, std::uint64_t seed);

struct SgdSettings {
  float learning_rate = 1e-6f;
  float momentum = 0.9f;
  float weight_decay = 0.0005f;
};

// v <- momentum*v + lr*(grad + weight_decay*param); param <- param - v.
// Bias is weight-decayed as well.
void sgd_step(ConvLayerParams& params, const ConvGrads& grads, const SgdSettings& settings);

}  // namespace dcount::nn
