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
#include <string>
#include <utility>
#include <vector>

#include "dcount/density.hpp"
#include "dcount/kernels.hpp"
#include "dcount/tensor.hpp"

namespace dcount {

struct LayerSpec {
  enum class Kind : std::uint8_t { conv = 0, max_pool = 1 };

  Kind kind = Kind::conv;
  std::uint32_t kernel = 1;
  std::uint32_t in_channels = 0;
  std::uint32_t out_channels = 0;
  bool relu = false;

  static LayerSpec conv(std::uint32_t kernel, std::uint32_t in, std::uint32_t out, bool relu) {
    return {Kind::conv, kernel, in, out, relu};
  }
  static LayerSpec pool() { return {Kind::max_pool, 2, 0, 0, false}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// A single chain of convolutions and 2x2 max-pools.
struct ArchitectureSpec {
  std::vector<LayerSpec> layers;

  std::size_t conv_layers() const;
  std::uint32_t output_stride() const;
  std::uint32_t input_channels() const;
  std::string describe() const;

  // Chain consistency, odd kernels, ReLU on every conv except the last, and
  // a final 1x1 conv with one output channel. Throws ConfigError.
  void validate() const;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

// conv9 3->36, pool, conv7 36->72, pool, conv7 72->36, conv7 36->24,
// conv7 24->16, conv1 16->1 (no ReLU). Output stride 4, 324,117 parameters.
ArchitectureSpec default_architecture();

// The stack the counting model is built around: six convs in one column.
bool is_six_conv_column(const ArchitectureSpec& spec);

inline constexpr std::size_t kMinInputSide = 16;

// Smallest input side a model accepts: enough for a 4x4 output map. 16 for
// the default architecture.
std::size_t min_input_side(const ArchitectureSpec& spec);

class FcnModel {
 public:
  explicit FcnModel(ArchitectureSpec spec);  // all parameters zero

  // Weights ~ N(0, stddev^2), biases zero.
  static FcnModel gaussian(ArchitectureSpec spec, float stddev, std::uint64_t seed);

  const ArchitectureSpec& spec() const { return spec_; }
  std::vector<nn::ConvLayerParams>& convs() { return convs_; }
  const std::vector<nn::ConvLayerParams>& convs() const { return convs_; }

 private:
  ArchitectureSpec spec_;
  std::vector<nn::ConvLayerParams> convs_;
};

// Output map dims for an HxW input.
std::pair<std::size_t, std::size_t> output_dims(const ArchitectureSpec& spec, std::size_t height, std::size_t width);

// Pixel values in [0, 1] are shifted by -kInputOffset before the first conv.
inline constexpr float kInputOffset = 0.5f;

// Replicates a grayscale image to the model's input channel count, applies
// the input offset and checks the minimum size. Throws InferenceError.
Tensor prepare_input(const FcnModel& model, const Tensor& image);

// Raw (possibly negative) density map at the model's output stride.
DensityMap forward(const FcnModel& model, const Tensor& image);

// Element-wise sum of the output map.
double predict_count(const FcnModel& model, const Tensor& image);

std::size_t count_params(const ArchitectureSpec& spec);
std::size_t count_params(const FcnModel& model);

// 2*k^2*c_in*c_out*h*w per conv, with h, w the conv's input dims.
std::uint64_t flops(const ArchitectureSpec& spec, std::size_t height, std::size_t width);

// Everything the backward pass needs: each layer's input, pool argmaxes and
// the final output.
struct ForwardTrace {
  std::vector<Tensor> layer_inputs;
  std::vector<std::vector<std::uint32_t>> pool_argmax;
  Tensor output;
};

ForwardTrace forward_trace(const FcnModel& model, const Tensor& image);

// Parameter gradients, one entry per conv layer, given dLoss/dOutput.
std::vector<nn::ConvGrads> backward(const FcnModel& model, const ForwardTrace& trace, const Tensor& output_grad);

}  // namespace dcount
