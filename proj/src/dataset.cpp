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

#include "dcount/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "dcount/errors.hpp"
#include "dcount/image_io.hpp"

namespace dcount {

void DotAnnotatedImage::validate() const {
  if (pixels.rank() != 3 || pixels.empty()) throw ConfigError("sample '" + id + "' has no CxHxW pixel tensor");
  for (std::size_t i = 0; i < heads.size(); ++i) {
    const auto& h = heads[i];
    if (!(h.x >= 0.0f && h.x < static_cast<float>(width()) && h.y >= 0.0f && h.y < static_cast<float>(height()))) {
      throw AnnotationError("sample '" + id + "': head outside " + std::to_string(width()) + "x" +
                                std::to_string(height()) + " image",
                            i);
    }
  }
}

std::string_view to_string(DensityProfile profile) {
  switch (profile) {
    case DensityProfile::high:
      return "high";
    case DensityProfile::medium:
      return "medium";
    default:
      return "unspecified";
  }
}

DensityProfile parse_density_profile(std::string_view text) {
  if (text == "high") return DensityProfile::high;
  if (text == "medium") return DensityProfile::medium;
  if (text == "unspecified" || text.empty()) return DensityProfile::unspecified;
  throw ConfigError("unknown density profile '" + std::string(text) + "' (expected high or medium)");
}

std::filesystem::path DatasetManifest::resolve(std::size_t i) const {
  const auto& p = samples.at(i);
  return p.is_absolute() ? p : base_dir / p;
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  DatasetManifest m;
  m.name = path.stem().string();
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(line.substr(1));
      if (body.rfind("name:", 0) == 0) {
        m.name = trim(body.substr(5));
      } else if (body.rfind("density:", 0) == 0) {
        try {
          m.density = parse_density_profile(trim(body.substr(8)));
        } catch (const ConfigError& e) {
          throw ParseError(path.string() + ": " + e.what(), line_no);
        }
      }
      continue;
    }
    const std::string stem = std::filesystem::path(line).stem().string();
    if (!seen.insert(stem).second) throw ParseError(path.string() + ": duplicate sample id '" + stem + "'", line_no);
    m.samples.emplace_back(line);
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest " + path.string());
  if (!manifest.name.empty()) os << "# name: " << manifest.name << '\n';
  if (manifest.density != DensityProfile::unspecified) os << "# density: " << to_string(manifest.density) << '\n';
  for (const auto& s : manifest.samples) os << s.generic_string() << '\n';
  if (!os) throw IoError("failed writing manifest " + path.string());
}

DotAnnotatedImage load_annotations(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open annotation file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& what) { throw ParseError(path.string() + ": " + what, line_no); };

  // Header.
  while (std::getline(is, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  std::istringstream header(line);
  std::string magic, image_file;
  long long width = 0, height = 0, num_heads = 0;
  if (!(header >> magic) || magic != "DCNT1") fail("expected 'DCNT1' header");
  if (!(header >> width >> height >> num_heads >> image_file)) {
    fail("header must be 'DCNT1 <width> <height> <num_heads> <image_file>'");
  }
  if (width <= 0 || height <= 0) fail("non-positive image dimensions");
  if (num_heads < 0) fail("negative head count");

  DotAnnotatedImage sample;
  sample.id = path.stem().string();
  sample.heads.reserve(static_cast<std::size_t>(num_heads));
  while (static_cast<long long>(sample.heads.size()) < num_heads && std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    double x = 0.0, y = 0.0;
    std::string extra;
    if (!(fields >> x)) fail("bad x field");
    if (!(fields >> y)) fail("bad y field");
    if (fields >> extra) fail("unexpected trailing field '" + extra + "'");
    sample.heads.push_back({static_cast<float>(x), static_cast<float>(y)});
  }
  if (static_cast<long long>(sample.heads.size()) != num_heads) {
    fail("expected " + std::to_string(num_heads) + " heads, found " + std::to_string(sample.heads.size()));
  }
  while (std::getline(is, line)) {
    ++line_no;
    if (!trim(line).empty()) fail("unexpected content after the declared heads");
  }

  sample.pixels = read_netpbm(path.parent_path() / image_file);
  if (sample.width() != static_cast<std::size_t>(width) || sample.height() != static_cast<std::size_t>(height)) {
    throw ParseError(path.string() + ": header says " + std::to_string(width) + "x" + std::to_string(height) +
                     " but image is " + std::to_string(sample.width()) + "x" + std::to_string(sample.height()));
  }
  sample.validate();
  return sample;
}

void save_annotations(const DotAnnotatedImage& sample, const std::filesystem::path& path) {
  sample.validate();
  std::filesystem::path image_path = path;
  image_path.replace_extension(sample.pixels.channels() == 1 ? ".pgm" : ".ppm");
  write_netpbm(sample.pixels, image_path);
  std::ofstream os(path);
  if (!os) throw IoError("cannot write annotation file " + path.string());
  os << "DCNT1 " << sample.width() << ' ' << sample.height() << ' ' << sample.heads.size() << ' '
     << image_path.filename().string() << '\n';
  os << std::setprecision(9);
  for (const auto& h : sample.heads) os << h.x << ' ' << h.y << '\n';
  if (!os) throw IoError("failed writing annotation file " + path.string());
}

namespace {

DotAnnotatedImage crop(const DotAnnotatedImage& s, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h,
                       std::string suffix) {
  DotAnnotatedImage out;
  out.id = s.id + suffix;
  out.pixels = Tensor::chw(s.pixels.channels(), h, w);
  for (std::size_t c = 0; c < s.pixels.channels(); ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.pixels.at(c, y, x) = s.pixels.at(c, y0 + y, x0 + x);
  const auto fx0 = static_cast<float>(x0), fy0 = static_cast<float>(y0);
  const auto fx1 = static_cast<float>(x0 + w), fy1 = static_cast<float>(y0 + h);
  for (const auto& head : s.heads) {
    if (head.x >= fx0 && head.x < fx1 && head.y >= fy0 && head.y < fy1) {
      out.heads.push_back({head.x - fx0, head.y - fy0});
    }
  }
  return out;
}

}  // namespace

std::vector<DotAnnotatedImage> quadrant_crops(const DotAnnotatedImage& sample) {
  const std::size_t w = sample.width(), h = sample.height();
  if (w < 2 || h < 2) {
    throw AugmentationError("quadrant_crops needs at least a 2x2 image, '" + sample.id + "' is " + std::to_string(w) +
                            "x" + std::to_string(h));
  }
  const std::size_t mx = w / 2, my = h / 2;
  return {crop(sample, 0, 0, mx, my, "_q0"), crop(sample, mx, 0, w - mx, my, "_q1"),
          crop(sample, 0, my, mx, h - my, "_q2"), crop(sample, mx, my, w - mx, h - my, "_q3")};
}

DotAnnotatedImage horizontal_flip(const DotAnnotatedImage& sample) {
  DotAnnotatedImage out;
  out.id = sample.id + "_f";
  out.pixels = sample.pixels;
  const std::size_t w = sample.width();
  for (std::size_t c = 0; c < sample.pixels.channels(); ++c)
    for (std::size_t y = 0; y < sample.height(); ++y)
      for (std::size_t x = 0; x < w; ++x) out.pixels.at(c, y, x) = sample.pixels.at(c, y, w - 1 - x);
  out.heads.reserve(sample.heads.size());
  // Heads in the last partial column (x > width - 1) land on column 0.
  const auto last = static_cast<float>(w - 1);
  for (const auto& head : sample.heads) out.heads.push_back({std::max(0.0f, last - head.x), head.y});
  return out;
}

DotAnnotatedImage centre_crop(const DotAnnotatedImage& sample) {
  const std::size_t w = sample.width(), h = sample.height();
  if (w < 2 || h < 2) throw AugmentationError("centre_crop needs at least a 2x2 image");
  const std::size_t cw = w / 2, ch = h / 2;
  return crop(sample, (w - cw) / 2, (h - ch) / 2, cw, ch, "_c");
}

std::string_view to_string(AugmentationScheme scheme) {
  switch (scheme) {
    case AugmentationScheme::none:
      return "none";
    case AugmentationScheme::quadrants:
      return "quadrants";
    case AugmentationScheme::quadrants_centre:
      return "quadrants+center";
  }
  return "?";
}

AugmentationScheme parse_augmentation(std::string_view text) {
  if (text == "none") return AugmentationScheme::none;
  if (text == "quadrants") return AugmentationScheme::quadrants;
  if (text == "quadrants+center" || text == "quadrants+centre") return AugmentationScheme::quadrants_centre;
  throw ConfigError("unknown augmentation scheme '" + std::string(text) + "' (none, quadrants, quadrants+center)");
}

std::size_t samples_per_image(AugmentationScheme scheme) {
  switch (scheme) {
    case AugmentationScheme::none:
      return 2;
    case AugmentationScheme::quadrants:
      return 8;
    case AugmentationScheme::quadrants_centre:
      return 10;
  }
  return 0;
}

std::vector<DotAnnotatedImage> build_training_set(std::span<const DotAnnotatedImage> images,
                                                  AugmentationScheme scheme) {
  std::vector<DotAnnotatedImage> out;
  out.reserve(images.size() * samples_per_image(scheme));
  for (const auto& image : images) {
    std::vector<DotAnnotatedImage> crops;
    if (scheme == AugmentationScheme::none) {
      crops.push_back(image);
    } else {
      crops = quadrant_crops(image);
      if (scheme == AugmentationScheme::quadrants_centre) crops.push_back(centre_crop(image));
    }
    for (auto& c : crops) {
      auto flipped = horizontal_flip(c);
      out.push_back(std::move(c));
      out.push_back(std::move(flipped));
    }
  }
  return out;
}

std::vector<DotAnnotatedImage> load_all(const DatasetManifest& manifest) {
  std::vector<DotAnnotatedImage> images;
  images.reserve(manifest.samples.size());
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) images.push_back(load_annotations(manifest.resolve(i)));
  return images;
}

std::vector<DotAnnotatedImage> build_training_set(const DatasetManifest& manifest, AugmentationScheme scheme) {
  const auto images = load_all(manifest);
  return build_training_set(images, scheme);
}

TrainValSplit train_val_split(std::vector<DotAnnotatedImage> images, std::uint64_t seed) {
  if (images.size() < 10) {
    throw ConfigError("train/validation split needs at least 10 source images, got " + std::to_string(images.size()));
  }
  std::sort(images.begin(), images.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < images.size(); ++i) {
    if (images[i].id == images[i - 1].id) throw ConfigError("duplicate sample id '" + images[i].id + "'");
  }
  std::vector<std::size_t> order(images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(images.size())));
  std::vector<bool> is_val(images.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  TrainValSplit split;
  for (std::size_t i = 0; i < images.size(); ++i) {
    (is_val[i] ? split.validation : split.train).push_back(std::move(images[i]));
  }
  return split;
}

}  // namespace dcount
