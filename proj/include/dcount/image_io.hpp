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

#include <filesystem>

#include "dcount/tensor.hpp"

namespace dcount {

// Binary netpbm (P5 grayscale / P6 RGB, maxval up to 65535) to a CxHxW
// tensor scaled into [0, 1].
Tensor read_netpbm(const std::filesystem::path& path);

// Writes P5 for 1-channel and P6 for 3-channel tensors, 8 bits per sample.
// Values are clamped to [0, 1] and rounded to the nearest of 256 levels.
void write_netpbm(const Tensor& image, const std::filesystem::path& path);

// Rounds every value to the nearest k/255, the set write_netpbm can store.
void quantize_8bit(Tensor& image);

}  // namespace dcount
