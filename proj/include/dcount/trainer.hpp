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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcount/checkpoint.hpp"
#include "dcount/dataset.hpp"
#include "dcount/density.hpp"
#include "dcount/model.hpp"

namespace dcount {

// fixed: N(0, init_std^2) for every layer. he: N(0, 2 / fan_in) per layer.
enum class InitScheme { fixed, he };

struct TrainConfig {
  double base_lr = 1e-6;
  double lr_drop_factor = 10.0;
  std::uint64_t lr_drop_at_iter = 1'000'000;
  std::uint64_t total_iters = 2'000'000;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::size_t batch_size = 1;
  double init_std = 0.01;
  InitScheme init = InitScheme::fixed;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_every = 100'000;  // 0: final checkpoint only
  std::uint64_t validate_every = 10'000;
  AugmentationScheme augmentation = AugmentationScheme::quadrants;

  // batch_size, total_iters >= 1; rates and factors > 0; momentum in [0, 1).
  void validate() const;

  // Full-length schedule: 2e6 iterations at 1e-6, dropped 10x at 1e6.
  static TrainConfig paper_sht();
  // Desk-scale schedule for synthetic data on a CPU.
  static TrainConfig desk();
};

// Fresh parameters for `spec` according to config.init; biases start at zero.
FcnModel initial_model(const ArchitectureSpec& spec, const TrainConfig& config);

// key = value lines mirroring the TrainConfig fields, '#' comments allowed.
// An optional "preset = paper-sht|desk" line seeds the defaults and later
// keys override it. "seed" is mandatory.
TrainConfig parse_train_config(std::istream& is);
TrainConfig load_train_config(const std::filesystem::path& path);
std::string format_train_config(const TrainConfig& config);

struct LossReport {
  std::uint64_t iteration = 0;  // iterations completed
  double training_loss = 0.0;   // mean over the reporting window
  double validation_mae = 0.0;  // NaN without validation images
  double validation_mse = 0.0;
  double learning_rate = 0.0;
};

struct EuclideanLoss {
  double loss = 0.0;
  DensityMap gradient;
};

// loss = sum((estimate - target)^2) / (2N), gradient = (estimate - target) / N.
EuclideanLoss euclidean_loss(const DensityMap& estimate, const DensityMap& target, std::size_t batch_size = 1);

// base_lr before lr_drop_at_iter, base_lr / lr_drop_factor from then on.
double lr_at(std::uint64_t iteration, const TrainConfig& config);

struct TargetStats {
  std::size_t generated = 0;
  std::size_t cache_hits = 0;
  std::size_t repaired = 0;  // unreadable or inconsistent cache entries regenerated
};

// Stride-1 ground truth block-summed to output_stride, one map per sample.
// With a cache directory, maps are stored as <id>.s<stride>.dmap and reused.
std::vector<DensityMap> generate_targets(std::span<const DotAnnotatedImage> samples, std::uint32_t output_stride,
                                         const std::filesystem::path& cache_dir = {}, TargetStats* stats = nullptr,
                                         std::ostream* warnings = nullptr);

struct TrainOptions {
  std::filesystem::path out_dir;           // checkpoints + log.csv; empty disables both
  std::optional<std::uint64_t> stop_after;  // stop early at this iteration count
  std::ostream* progress = nullptr;
};

struct TrainResult {
  std::vector<LossReport> reports;
  std::vector<float> losses;  // one per iteration run in this call
  TrainingProgress progress;
};

// Sequential SGD from `start` up to config.total_iters (or stop_after). Sample
// order is a seeded shuffle per epoch derived from (seed, epoch), so resuming
// from a checkpoint replays exactly. Throws DivergenceError on a non-finite loss.
TrainResult train(FcnModel& model, std::span<const DotAnnotatedImage> train_samples,
                  std::span<const DensityMap> targets, std::span<const DotAnnotatedImage> validation,
                  const TrainConfig& config, TrainingProgress start = {}, const TrainOptions& options = {});

}  // namespace dcount
