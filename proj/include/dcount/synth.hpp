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

#include "dcount/dataset.hpp"

namespace dcount {

// Synthetic crowd scenes used in place of real benchmark data: a seeded
// cluster process for head positions, each head drawn as a dark blob on a
// noisy, shaded background.
struct SynthOptions {
  std::size_t width = 128;
  std::size_t height = 128;
  std::size_t min_count = 10;
  std::size_t max_count = 600;
  double clustering = 0.6;  // fraction of heads drawn from the Gaussian clusters
};

// high: 300..3000 heads, medium: 10..600 heads.
SynthOptions density_preset(DensityProfile profile, std::size_t width = 128, std::size_t height = 128);

// Head count is uniform in [min_count, max_count]. Blob radius grows with the
// head's mean distance to its neighbours, so sparse heads read as nearer the
// camera, and a per-scene factor in [0.7, 1.4] scales every radius. The scene
// is blurred (sigma 0.4..1.0 px) before sensor noise is added. Pixels are
// quantised to 8 bits so the scene survives a PGM round trip.
DotAnnotatedImage synth_scene(std::uint64_t seed, const SynthOptions& options);

}  // namespace dcount
