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

#include "dcount/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dcount/density.hpp"
#include "dcount/errors.hpp"
#include "dcount/image_io.hpp"

namespace dcount {

SynthOptions density_preset(DensityProfile profile, std::size_t width, std::size_t height) {
  SynthOptions o;
  o.width = width;
  o.height = height;
  switch (profile) {
    case DensityProfile::high:
      o.min_count = 300;
      o.max_count = 3000;
      break;
    case DensityProfile::medium:
      o.min_count = 10;
      o.max_count = 600;
      break;
    default:
      throw ConfigError("synthetic scenes need a high or medium density preset");
  }
  return o;
}

namespace {

struct Cluster {
  double cx, cy, spread;
};

// Separable Gaussian blur of a single-channel image, edges clamped.
void blur(Tensor& image, double sigma) {
  const auto h = static_cast<long>(image.height()), w = static_cast<long>(image.width());
  const long reach = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * reach + 1));
  double total = 0.0;
  for (long k = -reach; k <= reach; ++k) total += taps[static_cast<std::size_t>(k + reach)] = std::exp(-0.5 * k * k / (sigma * sigma));
  for (auto& t : taps) t /= total;

  std::vector<double> line;
  auto pass = [&](long lines, long length, auto&& at) {
    line.resize(static_cast<std::size_t>(length));
    for (long l = 0; l < lines; ++l) {
      for (long i = 0; i < length; ++i) {
        double acc = 0.0;
        for (long k = -reach; k <= reach; ++k) acc += taps[static_cast<std::size_t>(k + reach)] * at(l, std::clamp(i + k, 0L, length - 1));
        line[static_cast<std::size_t>(i)] = acc;
      }
      for (long i = 0; i < length; ++i) at(l, i) = static_cast<float>(line[static_cast<std::size_t>(i)]);
    }
  };
  pass(h, w, [&](long y, long x) -> float& { return image.at(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x)); });
  pass(w, h, [&](long x, long y) -> float& { return image.at(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x)); });
}

}  // namespace

DotAnnotatedImage synth_scene(std::uint64_t seed, const SynthOptions& o) {
  if (o.width < 32 || o.height < 32) throw ConfigError("synthetic scenes must be at least 32x32");
  if (o.min_count > o.max_count || o.max_count > 5000) {
    throw ConfigError("synthetic head count range must satisfy 0 <= min <= max <= 5000");
  }
  if (!(o.clustering >= 0.0 && o.clustering <= 1.0)) throw ConfigError("clustering must lie in [0, 1]");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto w = static_cast<double>(o.width), h = static_cast<double>(o.height);
  const double short_side = std::min(w, h);

  const std::size_t count = std::uniform_int_distribution<std::size_t>(o.min_count, o.max_count)(rng);
  const int n_clusters = std::uniform_int_distribution<int>(1, 4)(rng);
  std::vector<Cluster> clusters;
  for (int i = 0; i < n_clusters; ++i) {
    clusters.push_back({unit(rng) * (w - 1.0), unit(rng) * (h - 1.0), (0.08 + 0.12 * unit(rng)) * short_side});
  }

  // Heads live on [0, W-1] x [0, H-1] so flips keep them in bounds.
  DotAnnotatedImage scene;
  scene.id = "synth_" + std::to_string(seed);
  scene.heads.reserve(count);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    double x = unit(rng) * (w - 1.0), y = unit(rng) * (h - 1.0);
    if (unit(rng) < o.clustering) {
      const auto& c = clusters[std::uniform_int_distribution<std::size_t>(0, clusters.size() - 1)(rng)];
      for (int attempt = 0; attempt < 32; ++attempt) {
        const double cx = c.cx + c.spread * normal(rng), cy = c.cy + c.spread * normal(rng);
        if (cx >= 0.0 && cx <= w - 1.0 && cy >= 0.0 && cy <= h - 1.0) {
          x = cx;
          y = cy;
          break;
        }
      }
    }
    scene.heads.push_back({static_cast<float>(x), static_cast<float>(y)});
  }

  // Background: base level and a linear shading ramp.
  scene.pixels = Tensor::chw(1, o.height, o.width);
  const double base = 0.65 + 0.2 * unit(rng);
  const double gx = (unit(rng) - 0.5) * 0.15, gy = (unit(rng) - 0.5) * 0.15;
  for (std::size_t y = 0; y < o.height; ++y) {
    for (std::size_t x = 0; x < o.width; ++x) {
      const double v = base + gx * (static_cast<double>(x) / w - 0.5) + gy * (static_cast<double>(y) / h - 0.5);
      scene.pixels.at(0, y, x) = static_cast<float>(v);
    }
  }

  // Per-scene camera scale so head sizes vary between scenes as well as
  // within them.
  const double camera = 0.7 + 0.7 * unit(rng);
  const auto spacing = knn_mean_distances(scene.heads, kNearestNeighbours, isolated_head_distance(o.width, o.height));
  for (std::size_t i = 0; i < scene.heads.size(); ++i) {
    const double radius = camera * std::clamp(0.25 * spacing[i], 1.0, 2.5);
    const double contrast = 0.45 + 0.2 * unit(rng);
    const double s = radius / 1.5;
    const double inv = 1.0 / (2.0 * s * s);
    const double hx = scene.heads[i].x, hy = scene.heads[i].y;
    const auto reach = static_cast<long>(std::ceil(2.0 * radius));
    const long x0 = std::max<long>(0, std::lround(hx) - reach), x1 = std::min<long>(o.width - 1, std::lround(hx) + reach);
    const long y0 = std::max<long>(0, std::lround(hy) - reach), y1 = std::min<long>(o.height - 1, std::lround(hy) + reach);
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x) {
        const double dx = static_cast<double>(x) - hx, dy = static_cast<double>(y) - hy;
        float& p = scene.pixels.at(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        p = static_cast<float>(p * (1.0 - contrast * std::exp(-(dx * dx + dy * dy) * inv)));
      }
    }
  }

  // Lens blur, then sensor noise.
  blur(scene.pixels, 0.4 + 0.6 * unit(rng));
  for (auto& p : scene.pixels.values()) p = static_cast<float>(p + 0.08 * (unit(rng) - 0.5));
  quantize_8bit(scene.pixels);
  return scene;
}

}  // namespace dcount
