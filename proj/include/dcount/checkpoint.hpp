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
#include <iosfwd>

#include "dcount/model.hpp"

namespace dcount {

// Training position stored with the weights so a run can resume exactly.
// Sample order is a pure function of (seed, iteration), and the velocity
// buffers travel inside the layer parameters.
struct TrainingProgress {
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainingProgress&, const TrainingProgress&) = default;
};

struct Checkpoint {
  FcnModel model;
  TrainingProgress progress;
};

// Layout (little-endian):
//   "FCNC" | u16 version | u32 layer count | per layer: u8 kind, u8 relu,
//   u16 kernel, u32 in, u32 out | u32 CRC32 of payload | payload
// payload: u64 iteration, u64 seed, then for each conv layer in order its
// weights, bias, weight velocity and bias velocity as f32.
void write_checkpoint(std::ostream& os, const FcnModel& model, const TrainingProgress& progress = {});
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const FcnModel& model, const std::filesystem::path& path, const TrainingProgress& progress = {});
FcnModel load_checkpoint(const std::filesystem::path& path);
Checkpoint load_checkpoint_with_progress(const std::filesystem::path& path);

}  // namespace dcount
