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

#include "dcount/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "dcount/errors.hpp"
#include "dcount/metrics.hpp"

namespace dcount {

EuclideanLoss euclidean_loss(const DensityMap& estimate, const DensityMap& target, std::size_t batch_size) {
  if (estimate.height != target.height || estimate.width != target.width || estimate.stride != target.stride ||
      estimate.values.size() != target.values.size()) {
    throw ConfigError("euclidean_loss: estimate " + std::to_string(estimate.height) + "x" +
                      std::to_string(estimate.width) + "/" + std::to_string(estimate.stride) + " vs target " +
                      std::to_string(target.height) + "x" + std::to_string(target.width) + "/" +
                      std::to_string(target.stride));
  }
  if (batch_size < 1) throw ConfigError("euclidean_loss: batch size must be >= 1");
  EuclideanLoss out{0.0, DensityMap::zeros(estimate.height, estimate.width, estimate.stride)};
  const double inv_n = 1.0 / static_cast<double>(batch_size);
  double sq = 0.0;
  for (std::size_t i = 0; i < estimate.values.size(); ++i) {
    const double d = static_cast<double>(estimate.values[i]) - target.values[i];
    sq += d * d;
    out.gradient.values[i] = static_cast<float>(d * inv_n);
  }
  out.loss = 0.5 * sq * inv_n;
  return out;
}

FcnModel initial_model(const ArchitectureSpec& spec, const TrainConfig& config) {
  if (config.init == InitScheme::fixed) return FcnModel::gaussian(spec, static_cast<float>(config.init_std), config.seed);
  FcnModel model(spec);
  for (std::size_t i = 0; i < model.convs().size(); ++i) {
    auto& p = model.convs()[i];
    const double fan_in = static_cast<double>(p.in_channels() * p.kernel() * p.kernel());
    p.weights = nn::gaussian_init(p.weights.dims(), static_cast<float>(std::sqrt(2.0 / fan_in)),
                                  config.seed + 0x9E3779B97F4A7C15ULL * (i + 1));
  }
  return model;
}

double lr_at(std::uint64_t iteration, const TrainConfig& config) {
  if (iteration >= config.total_iters) {
    throw ConfigError("lr_at: iteration " + std::to_string(iteration) + " outside [0, " +
                      std::to_string(config.total_iters) + ")");
  }
  return iteration < config.lr_drop_at_iter ? config.base_lr : config.base_lr / config.lr_drop_factor;
}

namespace {

bool consistent_target(const DensityMap& map, const DotAnnotatedImage& sample, std::uint32_t stride) {
  if (map.stride != stride) return false;
  if (map.height != (sample.height() + stride - 1) / stride || map.width != (sample.width() + stride - 1) / stride) {
    return false;
  }
  for (float v : map.values) {
    if (!std::isfinite(v) || v < 0.0f) return false;
  }
  const double heads = static_cast<double>(sample.count());
  return std::abs(map.sum() - heads) < 1e-3 * std::max(1.0, heads / 1000.0);
}

DensityMap make_target(const DotAnnotatedImage& sample, std::uint32_t stride) {
  return block_sum_downsample(ground_truth_density(sample.width(), sample.height(), sample.heads), stride);
}

}  // namespace

std::vector<DensityMap> generate_targets(std::span<const DotAnnotatedImage> samples, std::uint32_t output_stride,
                                         const std::filesystem::path& cache_dir, TargetStats* stats,
                                         std::ostream* warnings) {
  if (output_stride < 1) throw ConfigError("generate_targets: stride must be >= 1");
  if (!cache_dir.empty()) std::filesystem::create_directories(cache_dir);
  const std::size_t n = samples.size();
  std::vector<DensityMap> maps(n);
  enum class Outcome { generated, hit, repaired };
  std::vector<Outcome> outcome(n, Outcome::generated);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    const auto& sample = samples[i];
    std::filesystem::path file;
    if (!cache_dir.empty()) {
      file = cache_dir / (sample.id + ".s" + std::to_string(output_stride) + ".dmap");
      std::error_code ec;
      if (std::filesystem::exists(file, ec)) {
        try {
          DensityMap cached = load_dmap(file);
          if (consistent_target(cached, sample, output_stride)) {
            maps[i] = std::move(cached);
            outcome[i] = Outcome::hit;
            continue;
          }
        } catch (const std::exception&) {
        }
        outcome[i] = Outcome::repaired;
      }
    }
    maps[i] = make_target(sample, output_stride);
    if (!file.empty()) save_dmap(maps[i], file);
  }

  TargetStats local;
  for (std::size_t i = 0; i < n; ++i) {
    switch (outcome[i]) {
      case Outcome::hit:
        ++local.cache_hits;
        break;
      case Outcome::repaired:
        ++local.repaired;
        if (warnings) *warnings << "warning: regenerated corrupt target cache entry for '" << samples[i].id << "'\n";
        break;
      case Outcome::generated:
        ++local.generated;
        break;
    }
  }
  if (stats) *stats = local;
  return maps;
}

namespace {

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::uint64_t epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (epoch + 1)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::pair<double, double> validation_scores(const FcnModel& model, std::span<const DotAnnotatedImage> validation) {
  if (validation.empty()) {
    return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  }
  std::vector<CountPair> pairs(validation.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < validation.size(); ++i) {
    pairs[i] = {static_cast<double>(validation[i].count()),
                std::max(0.0, predict_count(model, validation[i].pixels))};
  }
  return {mae(pairs), mse(pairs)};
}

void append_log(const std::filesystem::path& path, const LossReport& r) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream os(path, std::ios::app);
  if (!os) throw IoError("cannot append to " + path.string());
  if (fresh) os << "iteration,loss,val_mae,val_mse,lr\n";
  os.precision(10);
  const auto field = [&os](double v) -> std::ostream& {
    if (std::isfinite(v)) os << v;
    return os;
  };
  os << r.iteration << ',';
  field(r.training_loss) << ',';
  field(r.validation_mae) << ',';
  field(r.validation_mse) << ',';
  field(r.learning_rate) << '\n';
}

Tensor as_output_tensor(const DensityMap& map) { return Tensor({1, map.height, map.width}, map.values); }

}  // namespace

TrainResult train(FcnModel& model, std::span<const DotAnnotatedImage> train_samples,
                  std::span<const DensityMap> targets, std::span<const DotAnnotatedImage> validation,
                  const TrainConfig& config, TrainingProgress start, const TrainOptions& options) {
  config.validate();
  if (train_samples.empty()) throw ConfigError("train: no training samples");
  if (targets.size() != train_samples.size()) throw ConfigError("train: one target map per sample is required");
  const std::uint32_t stride = model.spec().output_stride();
  for (std::size_t i = 0; i < train_samples.size(); ++i) {
    const auto [oh, ow] = output_dims(model.spec(), train_samples[i].height(), train_samples[i].width());
    if (targets[i].stride != stride || targets[i].height != oh || targets[i].width != ow) {
      throw ConfigError("train: target for '" + train_samples[i].id + "' has stride " +
                        std::to_string(targets[i].stride) + " and dims " + std::to_string(targets[i].height) + "x" +
                        std::to_string(targets[i].width) + ", model produces stride " + std::to_string(stride) +
                        " and " + std::to_string(oh) + "x" + std::to_string(ow));
    }
  }
  if (start.iteration > config.total_iters) throw ConfigError("train: start iteration beyond total_iters");
  if (start.iteration > 0 && start.seed != config.seed) {
    throw ConfigError("train: resuming with seed " + std::to_string(config.seed) + " but checkpoint used seed " +
                      std::to_string(start.seed));
  }
  std::uint64_t end = config.total_iters;
  if (options.stop_after) end = std::min(end, std::max(*options.stop_after, start.iteration));
  const bool persist = !options.out_dir.empty();
  if (persist) std::filesystem::create_directories(options.out_dir);

  TrainResult result;
  result.progress = {start.iteration, config.seed};
  const std::size_t n = train_samples.size();
  std::uint64_t epoch_loaded = std::numeric_limits<std::uint64_t>::max();
  std::vector<std::size_t> order;
  double window_loss = 0.0;
  std::size_t window_count = 0;

  for (std::uint64_t it = start.iteration; it < end; ++it) {
    const double lr = lr_at(it, config);
    std::vector<nn::ConvGrads> grads;
    double step_loss = 0.0;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const std::uint64_t s = it * config.batch_size + b;
      if (s / n != epoch_loaded) {
        epoch_loaded = s / n;
        order = epoch_order(config.seed, epoch_loaded, n);
      }
      const std::size_t idx = order[s % n];
      const ForwardTrace trace = forward_trace(model, train_samples[idx].pixels);
      const DensityMap estimate{trace.output.height(), trace.output.width(), stride, trace.output.storage()};
      const EuclideanLoss loss = euclidean_loss(estimate, targets[idx], config.batch_size);
      if (!std::isfinite(loss.loss)) throw DivergenceError(it + 1);
      auto g = backward(model, trace, as_output_tensor(loss.gradient));
      if (grads.empty()) {
        grads = std::move(g);
      } else {
        for (std::size_t l = 0; l < grads.size(); ++l) {
          for (std::size_t j = 0; j < grads[l].weights.size(); ++j) grads[l].weights[j] += g[l].weights[j];
          for (std::size_t j = 0; j < grads[l].bias.size(); ++j) grads[l].bias[j] += g[l].bias[j];
        }
      }
      step_loss += loss.loss;
    }
    const nn::SgdSettings sgd{static_cast<float>(lr), static_cast<float>(config.momentum),
                              static_cast<float>(config.weight_decay)};
    for (std::size_t l = 0; l < grads.size(); ++l) nn::sgd_step(model.convs()[l], grads[l], sgd);

    const std::uint64_t done = it + 1;
    result.progress.iteration = done;
    result.losses.push_back(static_cast<float>(step_loss));
    window_loss += step_loss;
    ++window_count;

    if (done % config.validate_every == 0) {
      const auto [val_mae, val_mse] = validation_scores(model, validation);
      LossReport r{done, window_loss / static_cast<double>(window_count), val_mae, val_mse, lr};
      result.reports.push_back(r);
      window_loss = 0.0;
      window_count = 0;
      if (persist) append_log(options.out_dir / "log.csv", r);
      if (options.progress) {
        *options.progress << "iter " << done << "  loss " << r.training_loss;
        if (!validation.empty()) *options.progress << "  val_mae " << val_mae << "  val_mse " << val_mse;
        *options.progress << "  lr " << lr << std::endl;
      }
    }
    if (persist && config.checkpoint_every > 0 && done % config.checkpoint_every == 0) {
      save_checkpoint(model, options.out_dir / ("ckpt_" + std::to_string(done) + ".fcnc"), result.progress);
    }
  }
  if (persist && end > start.iteration && result.progress.iteration == config.total_iters) {
    save_checkpoint(model, options.out_dir / "final.fcnc", result.progress);
  }
  return result;
}

}  // namespace dcount
