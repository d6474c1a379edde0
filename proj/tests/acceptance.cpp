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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Run from ctest or directly; `acceptance 3 8` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "dcount/checkpoint.hpp"
#include "dcount/dataset.hpp"
#include "dcount/density.hpp"
#include "dcount/eval.hpp"
#include "dcount/metrics.hpp"
#include "dcount/model.hpp"
#include "dcount/synth.hpp"
#include "dcount/trainer.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace dcount;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

std::string checkpoint_bytes(const FcnModel& m, const TrainingProgress& p) {
  std::ostringstream os;
  write_checkpoint(os, m, p);
  return os.str();
}

// 1. Count conservation of the ground-truth renderer.
Outcome count_conservation() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20261016);
  double worst_ratio = 0.0;
  std::size_t worst_heads = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t w = 32 + rng() % 481, h = 32 + rng() % 481;
    const std::size_t n = rng() % 3001;
    std::uniform_real_distribution<float> ux(0.0f, std::nextafter(static_cast<float>(w), 0.0f)),
        uy(0.0f, std::nextafter(static_cast<float>(h), 0.0f));
    std::vector<HeadAnnotation> heads(n);
    for (auto& p : heads) p = {ux(rng), uy(rng)};
    // Every fourth set piles some heads onto the border and on top of each other.
    if (trial % 4 == 0) {
      for (std::size_t i = 0; i < n / 10; ++i) heads[i] = {0.0f, static_cast<float>(h) - 0.5f};
    }
    const double sum = ground_truth_density(w, h, heads).sum();
    const double tol = 1e-3 * std::max(1.0, static_cast<double>(n) / 1000.0);
    const double ratio = std::abs(sum - static_cast<double>(n)) / tol;
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      worst_heads = n;
    }
  }
  const double t = seconds_since(t0);
  return {worst_ratio < 1.0 && t < 60.0, "worst |sum-heads|/tol " + fixed(worst_ratio) + " (" +
                                             std::to_string(worst_heads) + " heads), " + fixed(t, 3) + " s"};
}

// 2. Analytic gradients against central differences of a double-precision
// forward built from the reference kernels.
Outcome gradient_check() {
  const auto t0 = Clock::now();
  using testing::DoubleParams;
  auto analytic = [](const FcnModel& m, const Tensor& image, const std::vector<double>& target) {
    const auto trace = forward_trace(m, image);
    Tensor grad(trace.output.dims());
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = static_cast<float>(trace.output[i] - target[i]);
    return backward(m, trace, grad);
  };
  // The deep chain has many ReLU and pool kinks within 1e-3 of any parameter,
  // so it uses a smaller step; double precision keeps round-off negligible.
  auto numeric = [](const ArchitectureSpec& spec, DoubleParams& p, double& v, const Tensor& image,
                    const std::vector<double>& target, double h = 1e-3) {
    const double saved = v;
    v = saved + h;
    const double up = testing::reference_loss(spec, p, image, target);
    v = saved - h;
    const double down = testing::reference_loss(spec, p, image, target);
    v = saved;
    return (up - down) / (2 * h);
  };
  std::mt19937_64 rng(7);
  auto random_target = [&rng](std::size_t n) {
    std::vector<double> t(n);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    for (auto& v : t) v = u(rng);
    return t;
  };

  // Miniature: first conv, pool and the 1x1 head, every parameter checked.
  const ArchitectureSpec mini{{LayerSpec::conv(9, 3, 4, true), LayerSpec::pool(), LayerSpec::conv(1, 4, 1, false)}};
  TrainConfig init = TrainConfig::desk();
  init.seed = 11;
  FcnModel small = initial_model(mini, init);
  for (auto& c : small.convs()) {
    for (auto& b : c.bias) b = std::uniform_real_distribution<float>(-0.1f, 0.1f)(rng);
  }
  const auto small_image = testing::random_tensor({3, 8, 8}, 12, 0.0f, 1.0f);
  const auto small_target = random_target(16);
  const auto gs = analytic(small, small_image, small_target);
  DoubleParams ps(small);
  double worst_mini = 0.0;
  std::size_t checked = 0;
  for (std::size_t l = 0; l < ps.weights.size(); ++l) {
    for (std::size_t i = 0; i < ps.weights[l].size(); ++i, ++checked) {
      worst_mini = std::max(worst_mini, testing::relative_error(gs[l].weights[i],
                                                                numeric(mini, ps, ps.weights[l][i], small_image, small_target)));
    }
    for (std::size_t i = 0; i < ps.bias[l].size(); ++i, ++checked) {
      worst_mini = std::max(worst_mini, testing::relative_error(gs[l].bias[i],
                                                                numeric(mini, ps, ps.bias[l][i], small_image, small_target)));
    }
  }

  // Full default chain: 50 parameters, layer chosen uniformly, then index.
  const auto spec = default_architecture();
  init.seed = 13;
  FcnModel full = initial_model(spec, init);
  const auto image = testing::random_tensor({3, 24, 24}, 14, 0.0f, 1.0f);
  const auto [oh, ow] = output_dims(spec, 24, 24);
  const auto target = random_target(oh * ow);
  const auto gf = analytic(full, image, target);
  DoubleParams pf(full);
  double worst_full = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t l = rng() % pf.weights.size();
    const bool bias = rng() % 8 == 0;
    if (bias) {
      const std::size_t i = rng() % pf.bias[l].size();
      worst_full = std::max(worst_full, testing::relative_error(gf[l].bias[i], numeric(spec, pf, pf.bias[l][i], image, target, 1e-5)));
    } else {
      const std::size_t i = rng() % pf.weights[l].size();
      worst_full =
          std::max(worst_full, testing::relative_error(gf[l].weights[i], numeric(spec, pf, pf.weights[l][i], image, target, 1e-5)));
    }
  }
  const double t = seconds_since(t0);
  return {worst_mini < 1e-3 && worst_full < 1e-3 && t < 60.0,
          "miniature (h=1e-3) max rel err " + fixed(worst_mini, 3) + " over " + std::to_string(checked) +
              " params; full chain (h=1e-5) max rel err " + fixed(worst_full, 3) + " over 50 params; " + fixed(t, 3) + " s"};
}

// 3. Quadrant crops partition pixels and heads exactly.
Outcome augmentation_partition() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(3);
  std::size_t failures = 0, boundary_heads = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t w = 2 + rng() % 199, h = 2 + rng() % 199, c = trial % 5 == 0 ? 3 : 1;
    DotAnnotatedImage s;
    s.id = "t" + std::to_string(trial);
    s.pixels = testing::random_tensor({c, h, w}, 1000 + trial, 0.0f, 1.0f);
    const std::size_t n = rng() % 300;
    std::uniform_real_distribution<float> ux(0.0f, static_cast<float>(w)), uy(0.0f, static_cast<float>(h));
    for (std::size_t i = 0; i < n; ++i) {
      s.heads.push_back({std::min(ux(rng), std::nextafter(static_cast<float>(w), 0.0f)),
                         std::min(uy(rng), std::nextafter(static_cast<float>(h), 0.0f))});
    }
    const float mx = static_cast<float>(w / 2), my = static_cast<float>(h / 2);
    for (auto p : {HeadAnnotation{mx, my}, HeadAnnotation{mx, 0.0f}, HeadAnnotation{0.0f, my},
                   HeadAnnotation{mx, static_cast<float>(h) - 1.0f}}) {
      s.heads.push_back(p);
      ++boundary_heads;
    }
    const auto q = quadrant_crops(s);
    const std::size_t ox[4] = {0, w / 2, 0, w / 2}, oy[4] = {0, 0, h / 2, h / 2};
    Tensor rebuilt(s.pixels.dims(), -1.0f);
    std::size_t heads = 0, covered = 0;
    std::vector<HeadAnnotation> restored;
    for (int i = 0; i < 4; ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t y = 0; y < q[i].height(); ++y) {
          for (std::size_t x = 0; x < q[i].width(); ++x) {
            float& dst = rebuilt.at(ch, oy[i] + y, ox[i] + x);
            if (dst != -1.0f) ++failures;
            dst = q[i].pixels.at(ch, y, x);
            ++covered;
          }
        }
      }
      heads += q[i].count();
      for (auto p : q[i].heads) restored.push_back({p.x + static_cast<float>(ox[i]), p.y + static_cast<float>(oy[i])});
    }
    if (!(rebuilt == s.pixels) || covered != s.pixels.size() || heads != s.count()) ++failures;
    auto key = [](const HeadAnnotation& a, const HeadAnnotation& b) { return std::tie(a.x, a.y) < std::tie(b.x, b.y); };
    auto original = s.heads;
    std::sort(original.begin(), original.end(), key);
    std::sort(restored.begin(), restored.end(), key);
    if (original != restored) ++failures;
  }
  const double t = seconds_since(t0);
  return {failures == 0 && t < 10.0, std::to_string(failures) + " mismatches over 100 images (" +
                                         std::to_string(boundary_heads) + " boundary heads), " + fixed(t, 3) + " s"};
}

// 4. Parameter budget.
Outcome parameter_budget() {
  const auto n = count_params(default_architecture());
  const double dev = (static_cast<double>(n) - 315000.0) / 315000.0;
  return {n == 324117 && std::abs(dev) <= 0.05,
          "count_params " + std::to_string(n) + ", " + fixed(100.0 * dev, 3) + "% from 315,000"};
}

// 5. Overfit a single 64x64 scene.
Outcome single_image_overfit() {
  const auto t0 = Clock::now();
  SynthOptions o;
  o.width = o.height = 64;
  o.min_count = o.max_count = 30;
  const std::vector<DotAnnotatedImage> scene{synth_scene(505, o)};
  const auto targets = generate_targets(scene, default_architecture().output_stride());
  TrainConfig c = TrainConfig::desk();
  c.seed = 5;
  c.base_lr = 1e-5;
  c.total_iters = 2000;
  c.lr_drop_at_iter = 2000;
  c.validate_every = 2000;
  FcnModel m = initial_model(default_architecture(), c);
  const auto r = train(m, scene, targets, {}, c);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    first += r.losses[i];
    last += r.losses[r.losses.size() - 100 + i];
  }
  const double reduction = r.losses.front() / (last / 100.0);
  const double count = predict_count(m, scene[0].pixels);
  const double rel = std::abs(count - 30.0) / 30.0;
  const double t = seconds_since(t0);
  return {rel <= 0.10 && reduction >= 100.0 && last < first && t < 300.0,
          "count " + fixed(count, 5) + " vs 30 (" + fixed(100 * rel, 3) + "%), initial loss / final 100-iter mean " +
              fixed(reduction, 5) + "x, " + fixed(t, 3) + " s"};
}

// State shared by criteria 6, 7 and 9: the desk-scale model and its test set.
struct DeskRun {
  bool ready = false;
  FcnModel model{default_architecture()};
  std::vector<DotAnnotatedImage> test;
};

DeskRun& desk() {
  static DeskRun run;
  return run;
}

double& desk_mean() {
  static double mean = 0.0;
  return mean;
}

void ensure_desk_model() {
  auto& d = desk();
  if (d.ready) return;
  const auto medium = density_preset(DensityProfile::medium);
  std::vector<DotAnnotatedImage> train_images;
  for (std::uint64_t i = 0; i < 200; ++i) train_images.push_back(synth_scene(1000 + i, medium));
  for (std::uint64_t i = 0; i < 50; ++i) d.test.push_back(synth_scene(900000 + i, medium));
  const auto samples = build_training_set(train_images, AugmentationScheme::quadrants);
  const auto targets = generate_targets(samples, default_architecture().output_stride());
  TrainConfig c = TrainConfig::desk();
  c.seed = 5;
  d.model = initial_model(default_architecture(), c);
  train(d.model, samples, targets, {}, c, {}, {.out_dir = {}, .stop_after = std::nullopt, .progress = &std::cout});
  double mean = 0.0;
  for (const auto& s : train_images) mean += static_cast<double>(s.count());
  desk_mean() = mean / static_cast<double>(train_images.size());
  d.ready = true;
}

// 6. Desk-scale end-to-end against the predict-the-training-mean baseline.
Outcome desk_end_to_end() {
  const auto t0 = Clock::now();
  ensure_desk_model();
  auto& d = desk();
  std::vector<CountPair> baseline;
  for (const auto& s : d.test) baseline.emplace_back(static_cast<double>(s.count()), desk_mean());
  const auto report = evaluate(d.model, d.test, ScaleScheme{{1.0, 0.8}});
  const double base = mae(baseline);
  const double improvement = 1.0 - report.mae / base;
  // Context only: single-scale error and the mean signed error per scale.
  const auto single = evaluate(d.model, d.test, ScaleScheme{{1.0}});
  double bias_full = 0.0, bias_small = 0.0;
  for (const auto& s : d.test) {
    const auto per = multiscale_count(d.model, s.pixels, ScaleScheme{{1.0, 0.8}}).per_scale;
    bias_full += per[0] - static_cast<double>(s.count());
    bias_small += per[1] - static_cast<double>(s.count());
  }
  const double n = static_cast<double>(d.test.size());
  const double t = seconds_since(t0);
  return {report.complete() && improvement >= 0.40 && t <= 3600.0,
          "MAE " + fixed(report.mae, 5) + " (MSE " + fixed(report.mse, 5) + ") vs baseline MAE " + fixed(base, 5) +
              " (MSE " + fixed(mse(baseline), 5) + "): " + fixed(100 * improvement, 4) + "% lower; single-scale MAE " +
              fixed(single.mae, 4) + ", mean signed error " + fixed(bias_full / n, 4) + " at 1.0 and " +
              fixed(bias_small / n, 4) + " at 0.8; " + fixed(t, 4) + " s"};
}

// 7. Two-scale counts are the mean of the single-scale counts.
Outcome multiscale_contract() {
  ensure_desk_model();
  auto& d = desk();
  double worst = 0.0;
  for (const auto& s : d.test) {
    const double two = multiscale_count(d.model, s.pixels, ScaleScheme{{1.0, 0.8}}).count;
    const double a = predict_count(d.model, s.pixels);
    const double b = predict_count(d.model, bilinear_resize(s.pixels, 0.8));
    worst = std::max(worst, std::abs(two - std::max(0.0, 0.5 * (a + b))));
  }
  return {worst < 1e-4, "max |multiscale - mean(single)| " + fixed(worst, 3) + " over 50 trained-model counts"};
}

// 8. MAE/RMSE identities against a direct reimplementation.
Outcome metric_identities() {
  std::mt19937_64 rng(8);
  std::size_t order_violations = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    std::vector<CountPair> pairs(n);
    std::uniform_real_distribution<double> truth(0.0, 3000.0), noise(-200.0, 200.0);
    for (auto& p : pairs) {
      p.first = std::round(truth(rng));
      p.second = trial % 10 == 0 ? p.first : p.first + noise(rng);
    }
    double abs_sum = 0.0, sq_sum = 0.0;
    for (const auto& [z, est] : pairs) {
      abs_sum += std::abs(z - est);
      sq_sum += (z - est) * (z - est);
    }
    const double want_mae = abs_sum / static_cast<double>(n), want_mse = std::sqrt(sq_sum / static_cast<double>(n));
    const double got_mae = mae(pairs), got_mse = mse(pairs);
    if (got_mae > got_mse) ++order_violations;
    worst = std::max({worst, std::abs(got_mae - want_mae), std::abs(got_mse - want_mse)});
  }
  return {order_violations == 0 && worst < 1e-9,
          std::to_string(order_violations) + " sets with mae > mse; max deviation from direct formula " + fixed(worst, 3)};
}

// 9. FLOPs scale with area; latency is reported only.
Outcome speed_accuracy() {
  ensure_desk_model();
  auto& d = desk();
  const std::vector<double> scales{1.0, 0.9, 0.8, 0.7, 0.6, 0.5};
  const auto rows = speed_accuracy_sweep(d.model, std::span(d.test).first(20), scales);
  const double flops_ratio = static_cast<double>(rows.front().flops) / static_cast<double>(rows.back().flops);
  const double latency_ratio = rows.front().median_latency_ms / rows.back().median_latency_ms;
  return {std::abs(flops_ratio - 4.0) <= 0.2,
          "FLOPs ratio 1.0:0.5 = " + fixed(flops_ratio, 5) + "; median latency ratio " + fixed(latency_ratio, 4) +
              " (" + fixed(rows.front().median_latency_ms, 4) + " ms vs " + fixed(rows.back().median_latency_ms, 4) +
              " ms, not gated)"};
}

// 10. Bit-identical training and resume.
Outcome determinism_and_resume() {
  const auto t0 = Clock::now();
  const auto medium = density_preset(DensityProfile::medium);
  std::vector<DotAnnotatedImage> images;
  for (std::uint64_t i = 0; i < 20; ++i) images.push_back(synth_scene(7000 + i, medium));
  const auto samples = build_training_set(images, AugmentationScheme::quadrants);
  const auto targets = generate_targets(samples, default_architecture().output_stride());
  TrainConfig c = TrainConfig::desk();
  c.seed = 10;
  c.total_iters = 1000;
  c.lr_drop_at_iter = 600;
  c.validate_every = 1000;
  auto straight = [&] {
    FcnModel m = initial_model(default_architecture(), c);
    const auto r = train(m, samples, targets, {}, c);
    return checkpoint_bytes(m, r.progress);
  };
  const std::string a = straight(), b = straight();

  FcnModel m = initial_model(default_architecture(), c);
  const auto half = train(m, samples, targets, {}, c, {}, {.out_dir = {}, .stop_after = 500, .progress = nullptr});
  std::istringstream saved(checkpoint_bytes(m, half.progress));
  auto resumed = read_checkpoint(saved);
  const auto rest = train(resumed.model, samples, targets, {}, c, resumed.progress);
  const std::string r = checkpoint_bytes(resumed.model, rest.progress);
  const double t = seconds_since(t0);
  return {a == b && a == r, std::string("repeat run ") + (a == b ? "bit-identical" : "DIFFERS") + ", 500+500 resume " +
                                (a == r ? "bit-identical" : "DIFFERS") + " (" + std::to_string(a.size()) +
                                "-byte checkpoints), " + fixed(t, 4) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"count conservation", count_conservation},
      {"gradient correctness", gradient_check},
      {"augmentation partition", augmentation_partition},
      {"parameter budget", parameter_budget},
      {"single-image overfit", single_image_overfit},
      {"desk-scale end-to-end", desk_end_to_end},
      {"multi-scale contract", multiscale_contract},
      {"metric identities", metric_identities},
      {"speed-accuracy sweep", speed_accuracy},
      {"determinism and resume", determinism_and_resume},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  std::vector<std::string> summary;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    const std::string line =
        std::string(o.pass ? "PASS" : "FAIL") + "  " + std::to_string(id) + ". " + criteria[i].first + ": " + o.detail;
    std::cout << line << std::endl;
    summary.push_back(line);
  }
  std::cout << "\nsummary\n";
  for (const auto& l : summary) std::cout << l << '\n';
  return failed == 0 ? 0 : 1;
}
