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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcount/density.hpp"
#include "dcount/tensor.hpp"

namespace dcount {

// An image (CxHxW, values in [0, 1]) plus its head-centre dots.
struct DotAnnotatedImage {
  std::string id;
  Tensor pixels;
  std::vector<HeadAnnotation> heads;

  std::size_t width() const { return pixels.width(); }
  std::size_t height() const { return pixels.height(); }
  std::size_t count() const { return heads.size(); }

  // Throws AnnotationError for a head outside the pixel grid and ConfigError
  // for a malformed pixel tensor.
  void validate() const;
};

enum class DensityProfile { unspecified, high, medium };

std::string_view to_string(DensityProfile profile);
DensityProfile parse_density_profile(std::string_view text);

struct DatasetManifest {
  std::string name;
  DensityProfile density = DensityProfile::unspecified;
  std::vector<std::filesystem::path> samples;  // annotation files, absolute or manifest-relative
  std::filesystem::path base_dir;

  std::filesystem::path resolve(std::size_t i) const;
};

// One annotation path per line; "# density: high|medium" sets the profile and
// "# name: X" the dataset name (default: the file stem). Other '#' lines are
// comments.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Text format: "DCNT1 <width> <height> <num_heads> <image_file>" followed by
// one "x y" pair per line. The image file is resolved next to the annotation.
DotAnnotatedImage load_annotations(const std::filesystem::path& path);

// Writes <stem>.pgm (or .ppm for colour) beside the annotation file.
void save_annotations(const DotAnnotatedImage& sample, const std::filesystem::path& path);

// Top-left, top-right, bottom-left, bottom-right. Boundaries at floor(W/2)
// and floor(H/2); heads are routed with strict less-than.
std::vector<DotAnnotatedImage> quadrant_crops(const DotAnnotatedImage& sample);

// Mirrors pixels and maps each head x to (width - 1) - x.
DotAnnotatedImage horizontal_flip(const DotAnnotatedImage& sample);

// floor(W/2) x floor(H/2) window centred in the image.
DotAnnotatedImage centre_crop(const DotAnnotatedImage& sample);

enum class AugmentationScheme { none, quadrants, quadrants_centre };

std::string_view to_string(AugmentationScheme scheme);
AugmentationScheme parse_augmentation(std::string_view text);
std::size_t samples_per_image(AugmentationScheme scheme);

// Every crop of the scheme followed by its horizontal flip.
std::vector<DotAnnotatedImage> build_training_set(std::span<const DotAnnotatedImage> images,
                                                  AugmentationScheme scheme);
std::vector<DotAnnotatedImage> build_training_set(const DatasetManifest& manifest, AugmentationScheme scheme);

std::vector<DotAnnotatedImage> load_all(const DatasetManifest& manifest);

struct TrainValSplit {
  std::vector<DotAnnotatedImage> train;
  std::vector<DotAnnotatedImage> validation;
};

// 9:1 split of source images. Ids are sorted, then shuffled with the seed, so
// the result does not depend on input order. Both halves come back sorted by id.
TrainValSplit train_val_split(std::vector<DotAnnotatedImage> images, std::uint64_t seed);

}  // namespace dcount
