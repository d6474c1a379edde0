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

#include "dcount/model.hpp"

#include <sstream>

#include "dcount/errors.hpp"

namespace dcount {

std::size_t ArchitectureSpec::conv_layers() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.kind == LayerSpec::Kind::conv;
  return n;
}

std::uint32_t ArchitectureSpec::output_stride() const {
  std::uint32_t s = 1;
  for (const auto& l : layers) {
    if (l.kind == LayerSpec::Kind::max_pool) s *= 2;
  }
  return s;
}

std::uint32_t ArchitectureSpec::input_channels() const {
  for (const auto& l : layers) {
    if (l.kind == LayerSpec::Kind::conv) return l.in_channels;
  }
  return 0;
}

std::string ArchitectureSpec::describe() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (i) os << ", ";
    if (l.kind == LayerSpec::Kind::max_pool) {
      os << "pool2";
    } else {
      os << "conv" << l.kernel << ' ' << l.in_channels << "->" << l.out_channels << (l.relu ? "+relu" : "");
    }
  }
  return os.str();
}

void ArchitectureSpec::validate() const {
  if (conv_layers() == 0) throw ConfigError("architecture has no conv layers");
  std::uint32_t channels = 0;
  std::size_t seen = 0;
  const std::size_t total = conv_layers();
  for (const auto& l : layers) {
    if (l.kind == LayerSpec::Kind::max_pool) {
      if (seen == 0) throw ConfigError("architecture must start with a conv layer");
      if (l.kernel != 2) throw ConfigError("only 2x2 max-pooling is supported");
      continue;
    }
    if (l.kind != LayerSpec::Kind::conv) throw ConfigError("unknown layer kind");
    ++seen;
    if (l.kernel == 0 || l.kernel % 2 == 0) throw ConfigError("conv kernel sizes must be odd");
    if (l.in_channels == 0 || l.out_channels == 0) throw ConfigError("conv channel counts must be positive");
    if (seen > 1 && l.in_channels != channels) {
      throw ConfigError("conv layer " + std::to_string(seen) + " expects " + std::to_string(l.in_channels) +
                        " channels but receives " + std::to_string(channels));
    }
    channels = l.out_channels;
    if (seen < total && !l.relu) throw ConfigError("every conv except the last must be followed by ReLU");
    if (seen == total && (l.relu || l.kernel != 1 || l.out_channels != 1)) {
      throw ConfigError("the final layer must be a 1x1 conv to one channel without ReLU");
    }
  }
  if (layers.back().kind != LayerSpec::Kind::conv) throw ConfigError("architecture must end with a conv layer");
}

ArchitectureSpec default_architecture() {
  return {{LayerSpec::conv(9, 3, 36, true), LayerSpec::pool(), LayerSpec::conv(7, 36, 72, true), LayerSpec::pool(),
           LayerSpec::conv(7, 72, 36, true), LayerSpec::conv(7, 36, 24, true), LayerSpec::conv(7, 24, 16, true),
           LayerSpec::conv(1, 16, 1, false)}};
}

bool is_six_conv_column(const ArchitectureSpec& spec) {
  try {
    spec.validate();
  } catch (const ConfigError&) {
    return false;
  }
  return spec.conv_layers() == 6;
}

FcnModel::FcnModel(ArchitectureSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  for (const auto& l : spec_.layers) {
    if (l.kind == LayerSpec::Kind::conv) convs_.push_back(nn::ConvLayerParams::zeros(l.out_channels, l.in_channels, l.kernel));
  }
}

FcnModel FcnModel::gaussian(ArchitectureSpec spec, float stddev, std::uint64_t seed) {
  FcnModel model(std::move(spec));
  for (std::size_t i = 0; i < model.convs_.size(); ++i) {
    auto& p = model.convs_[i];
    p.weights = nn::gaussian_init(p.weights.dims(), stddev, seed + 0x9E3779B97F4A7C15ULL * (i + 1));
  }
  return model;
}

std::pair<std::size_t, std::size_t> output_dims(const ArchitectureSpec& spec, std::size_t height, std::size_t width) {
  for (const auto& l : spec.layers) {
    if (l.kind == LayerSpec::Kind::max_pool) {
      height = (height + 1) / 2;
      width = (width + 1) / 2;
    }
  }
  return {height, width};
}

std::size_t min_input_side(const ArchitectureSpec& spec) { return 4 * std::size_t{spec.output_stride()}; }

Tensor prepare_input(const FcnModel& model, const Tensor& image) {
  if (image.rank() != 3) throw InferenceError("image must be CxHxW, got " + image.shape_string());
  const std::size_t min_side = min_input_side(model.spec());
  if (image.height() < min_side || image.width() < min_side) {
    throw InferenceError("image " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                         " is smaller than the " + std::to_string(min_side) + "x" + std::to_string(min_side) +
                         " minimum");
  }
  const std::size_t want = model.spec().input_channels();
  if (image.channels() != want && image.channels() != 1) {
    throw InferenceError("image has " + std::to_string(image.channels()) + " channels, model expects " +
                         std::to_string(want));
  }
  const std::size_t plane = image.height() * image.width();
  Tensor out = Tensor::chw(want, image.height(), image.width());
  for (std::size_t c = 0; c < want; ++c) {
    const float* src = image.raw() + (image.channels() == 1 ? 0 : c * plane);
    float* dst = out.raw() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] - kInputOffset;
  }
  return out;
}

namespace {

DensityMap to_density(const Tensor& out, std::uint32_t stride) {
  return DensityMap{out.height(), out.width(), stride, out.storage()};
}

}  // namespace

DensityMap forward(const FcnModel& model, const Tensor& image) {
  Tensor x = prepare_input(model, image);
  std::size_t conv = 0;
  for (const auto& l : model.spec().layers) {
    if (l.kind == LayerSpec::Kind::max_pool) {
      x = nn::maxpool2(x).output;
    } else {
      x = nn::conv2d_forward(x, model.convs()[conv++]);
      if (l.relu) nn::relu_inplace(x);
    }
  }
  return to_density(x, model.spec().output_stride());
}

double predict_count(const FcnModel& model, const Tensor& image) { return forward(model, image).sum(); }

std::size_t count_params(const ArchitectureSpec& spec) {
  std::size_t n = 0;
  for (const auto& l : spec.layers) {
    if (l.kind == LayerSpec::Kind::conv) {
      n += std::size_t{l.kernel} * l.kernel * l.in_channels * l.out_channels + l.out_channels;
    }
  }
  return n;
}

std::size_t count_params(const FcnModel& model) {
  std::size_t n = 0;
  for (const auto& p : model.convs()) n += p.param_count();
  return n;
}

std::uint64_t flops(const ArchitectureSpec& spec, std::size_t height, std::size_t width) {
  std::uint64_t total = 0;
  for (const auto& l : spec.layers) {
    if (l.kind == LayerSpec::Kind::max_pool) {
      height = (height + 1) / 2;
      width = (width + 1) / 2;
    } else {
      total += std::uint64_t{2} * l.kernel * l.kernel * l.in_channels * l.out_channels * height * width;
    }
  }
  return total;
}

ForwardTrace forward_trace(const FcnModel& model, const Tensor& image) {
  ForwardTrace trace;
  Tensor x = prepare_input(model, image);
  std::size_t conv = 0;
  for (const auto& l : model.spec().layers) {
    trace.layer_inputs.push_back(x);
    if (l.kind == LayerSpec::Kind::max_pool) {
      auto pooled = nn::maxpool2(x);
      trace.pool_argmax.push_back(std::move(pooled.argmax));
      x = std::move(pooled.output);
    } else {
      x = nn::conv2d_forward(x, model.convs()[conv++]);
      if (l.relu) nn::relu_inplace(x);
    }
  }
  trace.output = std::move(x);
  return trace;
}

std::vector<nn::ConvGrads> backward(const FcnModel& model, const ForwardTrace& trace, const Tensor& output_grad) {
  const auto& layers = model.spec().layers;
  if (trace.layer_inputs.size() != layers.size()) throw ConfigError("forward trace does not match the model");
  if (!output_grad.same_shape(trace.output)) {
    throw ConfigError("output gradient " + output_grad.shape_string() + " does not match output " +
                      trace.output.shape_string());
  }
  std::vector<nn::ConvGrads> grads(model.convs().size());
  std::size_t conv = model.convs().size();
  std::size_t pool = trace.pool_argmax.size();
  Tensor g = output_grad;
  for (std::size_t i = layers.size(); i-- > 0;) {
    const Tensor& input = trace.layer_inputs[i];
    if (layers[i].kind == LayerSpec::Kind::max_pool) {
      g = nn::maxpool2_backward(input.dims(), trace.pool_argmax[--pool], g);
      continue;
    }
    --conv;
    if (layers[i].relu) {
      const Tensor& activated = i + 1 < layers.size() ? trace.layer_inputs[i + 1] : trace.output;
      g = nn::relu_backward(activated, g);
    }
    grads[conv] = nn::conv2d_backward(input, model.convs()[conv], g, i > 0);
    g = std::move(grads[conv].input);
  }
  return grads;
}

}  // namespace dcount
