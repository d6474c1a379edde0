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
#include "dcount/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "binary_io.hpp"
#include "dcount/errors.hpp"

namespace dcount {

double DensityMap::sum() const {
  double s = 0.0;
  for (float v : values) s += v;
  return s;
}

std::vector<double> knn_mean_distances(std::span<const HeadAnnotation> heads, std::size_t k,
                                       double isolated_distance) {
  const std::size_t n = heads.size();
  std::vector<double> result(n, 0.0);
  if (n == 0) return result;
  if (n == 1) {
    result[0] = isolated_distance;
    return result;
  }
  const std::size_t take = std::min(k, n - 1);
#pragma omp parallel
  {
    std::vector<double> sq(n - 1);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t m = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dx = static_cast<double>(heads[j].x) - heads[i].x;
        const double dy = static_cast<double>(heads[j].y) - heads[i].y;
        sq[m++] = dx * dx + dy * dy;
      }
      std::partial_sort(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(take), sq.end());
      double total = 0.0;
      for (std::size_t t = 0; t < take; ++t) total += std::sqrt(sq[t]);
      result[i] = total / static_cast<double>(take);
    }
  }
  return result;
}

double isolated_head_distance(std::size_t width, std::size_t height) {
  return 0.1 * static_cast<double>(std::min(width, height));
}

double adaptive_sigma(double mean_distance) { return std::max(kSpreadPerDistance * mean_distance, kSigmaFloor); }

std::vector<KernelSpec> kernel_specs(std::span<const HeadAnnotation> heads, std::size_t width, std::size_t height) {
  const auto distances = knn_mean_distances(heads, kNearestNeighbours, isolated_head_distance(width, height));
  std::vector<KernelSpec> specs(heads.size());
  for (std::size_t i = 0; i < heads.size(); ++i) specs[i] = {i, distances[i], adaptive_sigma(distances[i])};
  return specs;
}

namespace {

void check_heads(std::size_t width, std::size_t height, std::span<const HeadAnnotation> heads) {
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const auto& h = heads[i];
    if (!(h.x >= 0.0f) || !(h.y >= 0.0f) || !(h.x < static_cast<float>(width)) ||
        !(h.y < static_cast<float>(height))) {
      throw AnnotationError("head (" + std::to_string(h.x) + ", " + std::to_string(h.y) + ") outside " +
                                std::to_string(width) + "x" + std::to_string(height) + " image",
                            i);
    }
  }
}

// Clipped 1-D Gaussian taps around centre; returns the first pixel index.
std::size_t gaussian_taps(double centre, double sigma, std::size_t extent, std::vector<double>& taps) {
  const double radius = std::ceil(kTruncationSigmas * sigma);
  const auto lo = static_cast<long>(std::max(0.0, std::ceil(centre - radius)));
  const auto hi = static_cast<long>(std::min(static_cast<double>(extent) - 1.0, std::floor(centre + radius)));
  taps.clear();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (long p = lo; p <= hi; ++p) {
    const double d = static_cast<double>(p) - centre;
    taps.push_back(std::exp(-d * d * inv));
  }
  return static_cast<std::size_t>(lo);
}

}  // namespace

DensityMap render_density_map(std::size_t width, std::size_t height, std::span<const HeadAnnotation> heads,
                              std::span<const double> sigmas) {
  if (heads.size() != sigmas.size()) throw ConfigError("render_density_map: heads and sigmas differ in length");
  check_heads(width, height, heads);
  std::vector<double> acc(width * height, 0.0);
  std::vector<double> tx, ty;
  // Serial accumulation keeps the map bit-reproducible.
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const double sigma = sigmas[i];
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("render_density_map: sigma must be positive");
    const std::size_t x0 = gaussian_taps(heads[i].x, sigma, width, tx);
    const std::size_t y0 = gaussian_taps(heads[i].y, sigma, height, ty);
    double sx = 0.0, sy = 0.0;
    for (double v : tx) sx += v;
    for (double v : ty) sy += v;
    const double norm = 1.0 / (sx * sy);
    for (std::size_t r = 0; r < ty.size(); ++r) {
      double* row = acc.data() + (y0 + r) * width + x0;
      const double wy = ty[r] * norm;
      for (std::size_t c = 0; c < tx.size(); ++c) row[c] += wy * tx[c];
    }
  }
  DensityMap map = DensityMap::zeros(height, width, 1);
  std::transform(acc.begin(), acc.end(), map.values.begin(), [](double v) { return static_cast<float>(v); });
  return map;
}

DensityMap ground_truth_density(std::size_t width, std::size_t height, std::span<const HeadAnnotation> heads) {
  check_heads(width, height, heads);
  const auto specs = kernel_specs(heads, width, height);
  std::vector<double> sigmas(specs.size());
  std::transform(specs.begin(), specs.end(), sigmas.begin(), [](const KernelSpec& s) { return s.sigma; });
  return render_density_map(width, height, heads, sigmas);
}

DensityMap block_sum_downsample(const DensityMap& map, std::size_t factor) {
  if (factor < 1) throw ConfigError("block_sum_downsample: factor must be >= 1");
  if (factor == 1) return map;
  const std::size_t oh = (map.height + factor - 1) / factor;
  const std::size_t ow = (map.width + factor - 1) / factor;
  std::vector<double> acc(oh * ow, 0.0);
  for (std::size_t y = 0; y < map.height; ++y)
    for (std::size_t x = 0; x < map.width; ++x) acc[(y / factor) * ow + x / factor] += map.at(y, x);
  DensityMap out = DensityMap::zeros(oh, ow, static_cast<std::uint32_t>(map.stride * factor));
  std::transform(acc.begin(), acc.end(), out.values.begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

DensityMap flip_horizontal(const DensityMap& map) {
  DensityMap out = map;
  for (std::size_t y = 0; y < map.height; ++y)
    for (std::size_t x = 0; x < map.width; ++x) out.at(y, x) = map.at(y, map.width - 1 - x);
  return out;
}

namespace {
constexpr char kDmapMagic[4] = {'D', 'M', 'A', 'P'};
constexpr std::uint16_t kDmapVersion = 1;
}  // namespace

void write_dmap(std::ostream& os, const DensityMap& map) {
  os.write(kDmapMagic, 4);
  detail::put<std::uint16_t>(os, kDmapVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(map.height));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(map.width));
  detail::put<std::uint16_t>(os, static_cast<std::uint16_t>(map.stride));
  detail::put_floats(os, map.values);
}

DensityMap read_dmap(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kDmapMagic)) throw IoError("not a DMAP stream");
  const auto version = detail::get<std::uint16_t>(is, "DMAP version");
  if (version != kDmapVersion) throw IoError("unsupported DMAP version " + std::to_string(version));
  DensityMap map;
  map.height = detail::get<std::uint32_t>(is, "DMAP height");
  map.width = detail::get<std::uint32_t>(is, "DMAP width");
  map.stride = detail::get<std::uint16_t>(is, "DMAP stride");
  map.values.resize(map.height * map.width);
  detail::get_floats(is, map.values, "DMAP values");
  return map;
}

void save_dmap(const DensityMap& map, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  write_dmap(os, map);
  if (!os) throw IoError("failed writing " + path.string());
}

DensityMap load_dmap(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_dmap(is);
}

void export_density_pgm(const DensityMap& map, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  float peak = 0.0f;
  for (float v : map.values) peak = std::max(peak, v);
  os << "P5\n" << map.width << ' ' << map.height << "\n255\n";
  std::string row(map.width, '\0');
  for (std::size_t y = 0; y < map.height; ++y) {
    for (std::size_t x = 0; x < map.width; ++x) {
      const float v = peak > 0.0f ? std::clamp(map.at(y, x) / peak, 0.0f, 1.0f) : 0.0f;
      row[x] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f)));
    }
    os.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace dcount
