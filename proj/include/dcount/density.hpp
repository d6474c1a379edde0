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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace dcount {

// Head centre in pixel coordinates; valid when 0 <= x < width, 0 <= y < height.
struct HeadAnnotation {
  float x = 0.0f;
  float y = 0.0f;
  friend bool operator==(const HeadAnnotation&, const HeadAnnotation&) = default;
};

// Non-negative grid whose sum is the crowd count. stride is the downsample
// factor relative to the source image.
struct DensityMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::uint32_t stride = 1;
  std::vector<float> values;

  static DensityMap zeros(std::size_t height, std::size_t width, std::uint32_t stride = 1) {
    return DensityMap{height, width, stride, std::vector<float>(height * width, 0.0f)};
  }

  float& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  float at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  double sum() const;

  friend bool operator==(const DensityMap&, const DensityMap&) = default;
};

inline constexpr std::size_t kNearestNeighbours = 5;
inline constexpr double kSpreadPerDistance = 0.3;
inline constexpr double kSigmaFloor = 1.0;
inline constexpr double kTruncationSigmas = 3.0;

struct KernelSpec {
  std::size_t head_index = 0;
  double mean_knn_distance = 0.0;
  double sigma = 0.0;
};

// Mean distance from each head to its k nearest other heads (fewer if fewer
// exist). A lone head gets isolated_distance. Empty input gives empty output.
std::vector<double> knn_mean_distances(std::span<const HeadAnnotation> heads, std::size_t k = kNearestNeighbours,
                                       double isolated_distance = 0.0);

// Distance assumed for a head with no neighbours: a tenth of the short side.
double isolated_head_distance(std::size_t width, std::size_t height);

// sigma = max(0.3 * mean_distance, 1 px).
double adaptive_sigma(double mean_distance);

std::vector<KernelSpec> kernel_specs(std::span<const HeadAnnotation> heads, std::size_t width, std::size_t height);

// Sums one unit-mass Gaussian per head. Each kernel is cut to a square of
// half-width ceil(3 sigma), clipped to the image, then renormalised so its
// in-bounds mass is exactly 1. Throws AnnotationError for out-of-bounds heads.
DensityMap render_density_map(std::size_t width, std::size_t height, std::span<const HeadAnnotation> heads,
                              std::span<const double> sigmas);

// knn distances -> adaptive sigmas -> render, at stride 1.
DensityMap ground_truth_density(std::size_t width, std::size_t height, std::span<const HeadAnnotation> heads);

// Each output cell holds the sum of a factor x factor input block (partial
// blocks at the right/bottom edges). Total mass is preserved.
DensityMap block_sum_downsample(const DensityMap& map, std::size_t factor);

DensityMap flip_horizontal(const DensityMap& map);

// Flat binary: "DMAP", u16 version, u32 height, u32 width, u16 stride, f32 LE values.
void write_dmap(std::ostream& os, const DensityMap& map);
DensityMap read_dmap(std::istream& is);
void save_dmap(const DensityMap& map, const std::filesystem::path& path);
DensityMap load_dmap(const std::filesystem::path& path);

// 8-bit preview scaled so the map maximum is 255. Lossy.
void export_density_pgm(const DensityMap& map, const std::filesystem::path& path);

}  // namespace dcount
