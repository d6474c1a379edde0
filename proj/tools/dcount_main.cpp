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

// Command-line front end: ground-truth generation, synthetic data, training,
// inference, evaluation, cross-dataset evaluation and the speed sweep.
//
// Exit codes: 0 success, 1 user error (bad flags, files or configs),
// 2 internal error (including training divergence).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dcount/checkpoint.hpp"
#include "dcount/dataset.hpp"
#include "dcount/density.hpp"
#include "dcount/errors.hpp"
#include "dcount/eval.hpp"
#include "dcount/image_io.hpp"
#include "dcount/synth.hpp"
#include "dcount/trainer.hpp"

namespace fs = std::filesystem;
using namespace dcount;

namespace {

constexpr int kOk = 0;
constexpr int kUserError = 1;
constexpr int kInternalError = 2;

void print_config(const std::string& command, const std::vector<std::pair<std::string, std::string>>& entries) {
  std::cout << "[" << command << "] resolved configuration:\n";
  for (const auto& [k, v] : entries) std::cout << "  " << k << " = " << v << '\n';
  std::cout << std::flush;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string signed_percent(double v) {
  const double rounded = std::round(v * 10.0) / 10.0 + 0.0;
  return (rounded >= 0.0 ? "+" : "") + fmt(rounded, 1) + "%";
}

std::ofstream open_report(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot write report " + path.string());
  return os;
}

struct GenDensityArgs {
  std::string annotations, out;
  unsigned stride = 1;
};

int cmd_gen_density(const GenDensityArgs& a) {
  print_config("gen-density", {{"annotations", a.annotations}, {"out", a.out}, {"stride", std::to_string(a.stride)}});
  if (a.stride < 1) throw ConfigError("--stride must be >= 1");
  const auto sample = load_annotations(a.annotations);
  DensityMap map = ground_truth_density(sample.width(), sample.height(), sample.heads);
  map = block_sum_downsample(map, a.stride);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_dmap(map, out);
  fs::path preview = out;
  preview.replace_extension(".pgm");
  export_density_pgm(map, preview);
  std::cout << "heads: " << sample.count() << '\n'
            << "map: " << map.width << "x" << map.height << " stride " << map.stride << '\n'
            << "map sum: " << fmt(map.sum()) << '\n'
            << "wrote " << out.string() << " and " << preview.string() << '\n';
  return kOk;
}

struct SynthArgs {
  std::string out, density = "medium", dims = "128x128";
  std::size_t images = 10;
  std::uint64_t seed = 0;
};

std::pair<std::size_t, std::size_t> parse_dims(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used_w = 0, used_h = 0;
    const std::string ws = text.substr(0, x), hs = text.substr(x + 1);
    const auto w = std::stoul(ws, &used_w), h = std::stoul(hs, &used_h);
    if (used_w != ws.size() || used_h != hs.size()) throw std::invalid_argument(text);
    return {w, h};
  } catch (const std::exception&) {
    throw ConfigError("--dims must look like WxH, got '" + text + "'");
  }
}

int cmd_synth(const SynthArgs& a) {
  print_config("synth", {{"out", a.out},
                         {"images", std::to_string(a.images)},
                         {"seed", std::to_string(a.seed)},
                         {"density", a.density},
                         {"dims", a.dims}});
  const auto profile = parse_density_profile(a.density);
  const auto [w, h] = parse_dims(a.dims);
  const SynthOptions options = density_preset(profile, w, h);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  DatasetManifest manifest;
  manifest.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
  manifest.density = profile;
  for (std::size_t i = 0; i < a.images; ++i) {
    DotAnnotatedImage scene = synth_scene(a.seed ^ (0x9E3779B97F4A7C15ULL * (i + 1)), options);
    std::ostringstream name;
    name << "img_" << std::setw(4) << std::setfill('0') << i;
    scene.id = name.str();
    save_annotations(scene, dir / (scene.id + ".txt"));
    manifest.samples.emplace_back(scene.id + ".txt");
  }
  save_manifest(manifest, dir / "manifest.txt");
  std::cout << "wrote " << a.images << " scenes and " << (dir / "manifest.txt").string() << '\n';
  return kOk;
}

struct TrainArgs {
  std::string manifest, config, out, resume;
};

int cmd_train(const TrainArgs& a) {
  const TrainConfig config = load_train_config(a.config);
  std::vector<std::pair<std::string, std::string>> entries = {
      {"manifest", a.manifest}, {"config", a.config}, {"out", a.out}, {"resume", a.resume.empty() ? "-" : a.resume}};
  std::istringstream lines(format_train_config(config));
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find(" = ");
    entries.emplace_back(line.substr(0, eq), line.substr(eq + 3));
  }
  print_config("train", entries);

  const ArchitectureSpec arch = default_architecture();
  FcnModel model(arch);
  TrainingProgress start{0, config.seed};
  if (!a.resume.empty()) {
    Checkpoint ck = load_checkpoint_with_progress(a.resume);
    if (ck.progress.iteration >= config.total_iters) {
      std::cout << "checkpoint already at iteration " << ck.progress.iteration << " of " << config.total_iters
                << "; nothing to do\n";
      return kOk;
    }
    model = std::move(ck.model);
    start = ck.progress;
    std::cout << "resuming from iteration " << start.iteration << '\n';
  } else {
    model = initial_model(arch, config);
  }

  const DatasetManifest manifest = load_manifest(a.manifest);
  TrainValSplit split = train_val_split(load_all(manifest), config.seed);
  const auto samples = build_training_set(split.train, config.augmentation);
  std::cout << "source images: " << split.train.size() << " train / " << split.validation.size() << " validation\n"
            << "training samples (" << to_string(config.augmentation) << "): " << samples.size() << '\n'
            << "model: " << model.spec().describe() << " (" << count_params(model) << " parameters)\n";
  const fs::path out(a.out);
  TargetStats stats;
  const auto targets = generate_targets(samples, model.spec().output_stride(), out / "targets", &stats, &std::cerr);
  std::cout << "targets: " << stats.generated << " generated, " << stats.cache_hits << " cached, " << stats.repaired
            << " repaired\n";
  const auto result = train(model, samples, targets, split.validation, config, start, {.out_dir = out, .stop_after = std::nullopt, .progress = &std::cout});
  std::cout << "finished at iteration " << result.progress.iteration << "; wrote " << (out / "final.fcnc").string()
            << '\n';
  return kOk;
}

struct InferArgs {
  std::string ckpt, image, scales = "1.0,0.8", heatmap;
};

int cmd_infer(const InferArgs& a) {
  print_config("infer", {{"ckpt", a.ckpt},
                         {"image", a.image},
                         {"scales", a.scales},
                         {"heatmap", a.heatmap.empty() ? "-" : a.heatmap}});
  const ScaleScheme scheme = ScaleScheme::parse(a.scales);
  const FcnModel model = load_checkpoint(a.ckpt);
  const fs::path image_path(a.image);
  Tensor pixels;
  if (image_path.extension() == ".txt") {
    const auto sample = load_annotations(image_path);
    std::cout << "annotated count: " << sample.count() << '\n';
    pixels = sample.pixels;
  } else {
    pixels = read_netpbm(image_path);
  }
  const auto result = multiscale_count(model, pixels, scheme);
  for (std::size_t i = 0; i < scheme.scales.size(); ++i) {
    std::cout << "scale " << scheme.scales[i] << ": " << fmt(result.per_scale[i]) << '\n';
  }
  std::cout << "mean count: " << fmt(result.count) << '\n';
  if (!a.heatmap.empty()) {
    const DensityMap map = forward(model, pixels);
    const fs::path out(a.heatmap);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_dmap(map, out);
    fs::path preview = out;
    preview.replace_extension(".pgm");
    DensityMap clipped = map;
    for (float& v : clipped.values) v = std::max(v, 0.0f);
    export_density_pgm(clipped, preview);
    std::cout << "heatmap: " << out.string() << " (sum " << fmt(map.sum()) << ")\n";
  }
  return kOk;
}

struct EvalArgs {
  std::string ckpt, manifest, scales = "1.0,0.8", report;
  int threads = 1;
};

void warn_skipped(const EvalReport& report) {
  if (!report.complete()) std::cerr << "warning: " << report.notes << '\n';
}

int cmd_eval(const EvalArgs& a) {
  print_config("eval", {{"ckpt", a.ckpt},
                        {"manifest", a.manifest},
                        {"scales", a.scales},
                        {"report", a.report},
                        {"threads", std::to_string(a.threads)}});
  const ScaleScheme scheme = ScaleScheme::parse(a.scales);
  const FcnModel model = load_checkpoint(a.ckpt);
  const DatasetManifest manifest = load_manifest(a.manifest);
  const EvalReport report = evaluate(model, manifest, scheme, {.threads = a.threads, .warnings = &std::cerr});
  auto os = open_report(a.report);
  write_eval_csv(os, report);
  warn_skipped(report);
  std::cout << "images: " << report.images.size() << '\n'
            << "MAE: " << fmt(report.mae) << '\n'
            << "MSE: " << fmt(report.mse) << '\n';
  return kOk;
}

struct XevalArgs {
  std::string ckpt, source, target_manifest, baseline, report, scales = "1.0,0.8";
  int threads = 1;
};

int cmd_xeval(const XevalArgs& a) {
  print_config("xeval", {{"ckpt", a.ckpt},
                         {"source", a.source},
                         {"target-manifest", a.target_manifest},
                         {"baseline", a.baseline},
                         {"scales", a.scales},
                         {"report", a.report},
                         {"threads", std::to_string(a.threads)}});
  const ScaleScheme scheme = ScaleScheme::parse(a.scales);
  const FcnModel model = load_checkpoint(a.ckpt);
  const DatasetManifest target = load_manifest(a.target_manifest);
  const EvalReport baseline = load_eval_csv(a.baseline);
  const CrossDomainReport r =
      cross_evaluate(model, a.source, target, baseline, scheme, {.threads = a.threads, .warnings = &std::cerr});
  auto os = open_report(a.report);
  write_cross_csv(os, r);
  std::cout << r.source << " => " << r.target << '\n'
            << "MAE: " << fmt(r.mae) << " (" << signed_percent(r.pct_increase_mae) << ")"
            << '\n'
            << "MSE: " << fmt(r.mse) << " (" << signed_percent(r.pct_increase_mse) << ")"
            << '\n';
  return kOk;
}

struct BenchArgs {
  std::string ckpt, manifest, scales = "1.0..0.3", report;
};

int cmd_bench(const BenchArgs& a) {
  print_config("bench", {{"ckpt", a.ckpt}, {"manifest", a.manifest}, {"scales", a.scales}, {"report", a.report}});
  const ScaleScheme scales = ScaleScheme::parse(a.scales);
  const FcnModel model = load_checkpoint(a.ckpt);
  const DatasetManifest manifest = load_manifest(a.manifest);
  const auto rows = speed_accuracy_sweep(model, manifest, scales.scales, &std::cerr);
  auto os = open_report(a.report);
  write_sweep_csv(os, rows);
  std::cout << "scale      mae      mse  median_ms  flops_ratio  speedup\n";
  for (const auto& r : rows) {
    std::cout << std::fixed << std::setprecision(2) << std::setw(5) << r.scale << std::setw(9) << r.mae
              << std::setw(9) << r.mse << std::setw(11) << std::setprecision(3) << r.median_latency_ms
              << std::setw(13) << std::setprecision(4)
              << static_cast<double>(r.flops) / static_cast<double>(rows.front().flops) << std::setw(9)
              << std::setprecision(2) << rows.front().median_latency_ms / r.median_latency_ms << '\n';
  }
  return kOk;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternalError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const AnnotationError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const AugmentationError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const InferenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
  return kUserError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dcount: density-map crowd counting with a fully convolutional network"};
  app.require_subcommand(1);

  GenDensityArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-density", "Render a ground-truth density map from an annotation file");
  gen_cmd->add_option("--annotations", gen.annotations, "DCNT1 annotation file")->required();
  gen_cmd->add_option("--out", gen.out, "Output DMAP path (a .pgm preview is written beside it)")->required();
  gen_cmd->add_option("--stride", gen.stride, "Block-sum downsample factor");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dot-annotated dataset and manifest");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--images", synth.images, "Number of scenes")->required();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed")->required();
  synth_cmd->add_option("--density", synth.density, "high (300-3000 heads) or medium (10-600)")->required();
  synth_cmd->add_option("--dims", synth.dims, "Scene size as WxH");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the counting network");
  train_cmd->add_option("--manifest", tr.manifest, "Training manifest (split 9:1 into train/validation)")->required();
  train_cmd->add_option("--config", tr.config, "key = value training config")->required();
  train_cmd->add_option("--out", tr.out, "Directory for checkpoints, targets and log.csv")->required();
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to resume from");

  InferArgs inf;
  auto* infer_cmd = app.add_subcommand("infer", "Estimate the count for one image");
  infer_cmd->add_option("--ckpt", inf.ckpt, "Model checkpoint")->required();
  infer_cmd->add_option("--image", inf.image, "PGM/PPM image or DCNT1 annotation file")->required();
  infer_cmd->add_option("--scales", inf.scales, "Comma-separated scales to average");
  infer_cmd->add_option("--heatmap", inf.heatmap, "Write the scale-1.0 density map (DMAP + PGM preview)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate MAE/MSE over a manifest");
  eval_cmd->add_option("--ckpt", ev.ckpt, "Model checkpoint")->required();
  eval_cmd->add_option("--manifest", ev.manifest, "Test manifest")->required();
  eval_cmd->add_option("--scales", ev.scales, "Comma-separated scales to average");
  eval_cmd->add_option("--report", ev.report, "Per-image CSV output")->required();
  eval_cmd->add_option("--threads", ev.threads, "Images evaluated in parallel");

  XevalArgs xe;
  auto* xeval_cmd = app.add_subcommand("xeval", "Cross-dataset evaluation against an in-domain baseline report");
  xeval_cmd->add_option("--ckpt", xe.ckpt, "Checkpoint trained on the source domain")->required();
  xeval_cmd->add_option("--source", xe.source, "Source domain name")->required();
  xeval_cmd->add_option("--target-manifest", xe.target_manifest, "Target domain manifest")->required();
  xeval_cmd->add_option("--baseline", xe.baseline, "In-domain eval report on the target manifest")->required();
  xeval_cmd->add_option("--report", xe.report, "Cross-domain CSV output")->required();
  xeval_cmd->add_option("--scales", xe.scales, "Comma-separated scales to average");
  xeval_cmd->add_option("--threads", xe.threads, "Images evaluated in parallel");

  BenchArgs be;
  auto* bench_cmd = app.add_subcommand("bench", "Resolution vs speed/accuracy sweep");
  bench_cmd->add_option("--ckpt", be.ckpt, "Model checkpoint")->required();
  bench_cmd->add_option("--manifest", be.manifest, "Benchmark manifest")->required();
  bench_cmd->add_option("--scales", be.scales, "Descending scales, e.g. 1.0..0.3 or 1.0,0.5");
  bench_cmd->add_option("--report", be.report, "Sweep CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUserError;
  }

  if (*gen_cmd) return guarded([&] { return cmd_gen_density(gen); });
  if (*synth_cmd) return guarded([&] { return cmd_synth(synth); });
  if (*train_cmd) return guarded([&] { return cmd_train(tr); });
  if (*infer_cmd) return guarded([&] { return cmd_infer(inf); });
  if (*eval_cmd) return guarded([&] { return cmd_eval(ev); });
  if (*xeval_cmd) return guarded([&] { return cmd_xeval(xe); });
  if (*bench_cmd) return guarded([&] { return cmd_bench(be); });
  return kUserError;
}
