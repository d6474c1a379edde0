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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcount/dataset.hpp"
#include "dcount/metrics.hpp"
#include "dcount/model.hpp"

namespace dcount {

// Ordered list of image scales whose counts are averaged.
struct ScaleScheme {
  std::vector<double> scales{1.0, 0.8};

  // Non-empty, every factor in (0, 1].
  void validate() const;
  std::string to_string() const;

  // "1.0,0.8" or a descending range "1.0..0.3" in steps of 0.1.
  static ScaleScheme parse(std::string_view text);
  // The four averaging schemes: {1}, {1, .8}, {1, .8, .7}, {1, .8, .7, .6}.
  static ScaleScheme numbered(int scheme);
};

// Half-pixel-centred bilinear interpolation to an explicit size (>= 1x1).
Tensor resize_bilinear(const Tensor& image, std::size_t out_height, std::size_t out_width);

// Scales both sides by `scale` (rounded), preserving aspect ratio. Throws
// InferenceError when the result is below 16x16.
Tensor bilinear_resize(const Tensor& image, double scale);

struct MultiScaleCount {
  double count = 0.0;              // mean over scales, clamped at 0
  std::vector<double> per_scale;   // raw predict_count per scale, scheme order
};

MultiScaleCount multiscale_count(const FcnModel& model, const Tensor& image, const ScaleScheme& scheme);

struct ImageResult {
  std::string id;
  double true_count = 0.0;
  double estimated = 0.0;
  double latency_ms = 0.0;
};

struct EvalReport {
  std::vector<ImageResult> images;
  double mae = 0.0;
  double mse = 0.0;
  ScaleScheme scheme;
  std::vector<std::string> skipped;
  std::string notes;

  bool complete() const { return skipped.empty(); }
  std::vector<CountPair> pairs() const;
  // Recomputes mae/mse from the per-image records.
  void aggregate();
};

struct EvalOptions {
  int threads = 1;
  std::ostream* warnings = nullptr;
};

// Unloadable samples are listed in `skipped`. Throws ConfigError if nothing
// could be evaluated.
EvalReport evaluate(const FcnModel& model, const DatasetManifest& manifest, const ScaleScheme& scheme,
                    const EvalOptions& options = {});
EvalReport evaluate(const FcnModel& model, std::span<const DotAnnotatedImage> images, const ScaleScheme& scheme,
                    const EvalOptions& options = {});

// CSV "id,true,estimated,latency_ms".
void write_eval_csv(std::ostream& os, const EvalReport& report);
void save_eval_csv(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_eval_csv(const std::filesystem::path& path);

struct CrossDomainReport {
  std::string source;
  std::string target;
  double mae = 0.0;
  double mse = 0.0;
  double baseline_mae = 0.0;
  double baseline_mse = 0.0;
  double pct_increase_mae = 0.0;
  double pct_increase_mse = 0.0;
};

// 100 * (cross - baseline) / baseline.
double percent_increase(double cross, double baseline);

// Throws ConfigError if the baseline does not cover exactly the target's ids.
CrossDomainReport cross_domain_report(std::string source, std::string target, const EvalReport& cross,
                                      const EvalReport& baseline);
CrossDomainReport cross_evaluate(const FcnModel& model, const std::string& source_name,
                                 const DatasetManifest& target_manifest, const EvalReport& baseline,
                                 const ScaleScheme& scheme = {}, const EvalOptions& options = {});

// CSV "source,target,mae,mse,baseline_mae,baseline_mse,pct_increase_mae,pct_increase_mse".
void write_cross_csv(std::ostream& os, const CrossDomainReport& report);

struct SweepRow {
  double scale = 1.0;
  double mae = 0.0;
  double mse = 0.0;
  double mean_latency_ms = 0.0;
  double median_latency_ms = 0.0;
  std::uint64_t flops = 0;  // mean per image at this scale
};

// Single-scale evaluation at each scale (strictly descending, in (0, 1]).
// Runs serially so timings do not contend.
std::vector<SweepRow> speed_accuracy_sweep(const FcnModel& model, std::span<const DotAnnotatedImage> images,
                                           std::span<const double> scales);
std::vector<SweepRow> speed_accuracy_sweep(const FcnModel& model, const DatasetManifest& manifest,
                                           std::span<const double> scales, std::ostream* warnings = nullptr);

// CSV "scale,mae,mse,latency_ms,flops".
void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows);

}  // namespace dcount
