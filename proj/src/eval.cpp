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

#include "dcount/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "dcount/errors.hpp"

namespace dcount {

double mae(std::span<const CountPair> pairs) {
  if (pairs.empty()) throw ConfigError("mae of an empty set");
  double s = 0.0;
  for (const auto& [z, est] : pairs) s += std::abs(z - est);
  return s / static_cast<double>(pairs.size());
}

double mse(std::span<const CountPair> pairs) {
  if (pairs.empty()) throw ConfigError("mse of an empty set");
  double s = 0.0;
  for (const auto& [z, est] : pairs) s += (z - est) * (z - est);
  return std::sqrt(s / static_cast<double>(pairs.size()));
}

void ScaleScheme::validate() const {
  if (scales.empty()) throw ConfigError("scale scheme is empty");
  for (double s : scales) {
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("scale " + std::to_string(s) + " outside (0, 1]");
  }
}

std::string ScaleScheme::to_string() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < scales.size(); ++i) os << (i ? "," : "") << scales[i];
  return os.str();
}

ScaleScheme ScaleScheme::parse(std::string_view text) {
  const std::string s(text);
  const auto number = [&](const std::string& tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tok.size()) throw ConfigError("bad scale '" + tok + "' in '" + s + "'");
    return v;
  };
  ScaleScheme scheme;
  scheme.scales.clear();
  if (const auto dots = s.find(".."); dots != std::string::npos && s.find(',') == std::string::npos) {
    const double hi = number(s.substr(0, dots)), lo = number(s.substr(dots + 2));
    if (lo > hi) throw ConfigError("scale range must run high..low, got '" + s + "'");
    // Steps of 0.1, computed from integers to avoid drift.
    const auto top = std::lround(hi * 10.0), bottom = std::lround(lo * 10.0);
    for (long t = top; t >= bottom; --t) scheme.scales.push_back(static_cast<double>(t) / 10.0);
  } else {
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) scheme.scales.push_back(number(tok));
  }
  scheme.validate();
  return scheme;
}

ScaleScheme ScaleScheme::numbered(int scheme) {
  switch (scheme) {
    case 1:
      return {{1.0}};
    case 2:
      return {{1.0, 0.8}};
    case 3:
      return {{1.0, 0.8, 0.7}};
    case 4:
      return {{1.0, 0.8, 0.7, 0.6}};
    default:
      throw ConfigError("scale schemes are numbered 1 to 4");
  }
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_height, std::size_t out_width) {
  if (image.rank() != 3 || image.empty()) throw ConfigError("resize_bilinear needs a CxHxW image");
  if (out_height < 1 || out_width < 1) throw ConfigError("resize_bilinear: output must be at least 1x1");
  const std::size_t channels = image.channels(), height = image.height(), width = image.width();
  if (out_height == height && out_width == width) return image;

  struct Tap {
    std::size_t lo, hi;
    float frac;
  };
  const auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      const double src = std::clamp((static_cast<double>(i) + 0.5) * ratio - 0.5, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(src));
      t[i] = {lo, std::min(lo + 1, in - 1), static_cast<float>(src - static_cast<double>(lo))};
    }
    return t;
  };
  const auto ty = taps(height, out_height), tx = taps(width, out_width);
  Tensor out = Tensor::chw(channels, out_height, out_width);
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < out_height; ++y) {
      const auto& vy = ty[y];
      for (std::size_t x = 0; x < out_width; ++x) {
        const auto& vx = tx[x];
        const float top = image.at(c, vy.lo, vx.lo) + vx.frac * (image.at(c, vy.lo, vx.hi) - image.at(c, vy.lo, vx.lo));
        const float bot = image.at(c, vy.hi, vx.lo) + vx.frac * (image.at(c, vy.hi, vx.hi) - image.at(c, vy.hi, vx.lo));
        out.at(c, y, x) = top + vy.frac * (bot - top);
      }
    }
  }
  return out;
}

Tensor bilinear_resize(const Tensor& image, double scale) {
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("resize scale must lie in (0, 1]");
  if (image.rank() != 3) throw ConfigError("bilinear_resize needs a CxHxW image");
  const auto h = static_cast<std::size_t>(std::lround(scale * static_cast<double>(image.height())));
  const auto w = static_cast<std::size_t>(std::lround(scale * static_cast<double>(image.width())));
  if (h < kMinInputSide || w < kMinInputSide) {
    throw InferenceError("scale " + std::to_string(scale) + " shrinks the image to " + std::to_string(w) + "x" +
                         std::to_string(h) + ", below 16x16");
  }
  return resize_bilinear(image, h, w);
}

MultiScaleCount multiscale_count(const FcnModel& model, const Tensor& image, const ScaleScheme& scheme) {
  scheme.validate();
  MultiScaleCount r;
  for (double s : scheme.scales) {
    try {
      r.per_scale.push_back(predict_count(model, s == 1.0 ? image : bilinear_resize(image, s)));
    } catch (const InferenceError& e) {
      throw InferenceError("at scale " + std::to_string(s) + ": " + e.what());
    }
  }
  // Summing in sorted order makes the mean independent of the scheme order.
  std::vector<double> sorted = r.per_scale;
  std::sort(sorted.begin(), sorted.end());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
  r.count = std::max(0.0, mean);
  return r;
}

std::vector<CountPair> EvalReport::pairs() const {
  std::vector<CountPair> p;
  p.reserve(images.size());
  for (const auto& r : images) p.emplace_back(r.true_count, r.estimated);
  return p;
}

void EvalReport::aggregate() {
  const auto p = pairs();
  mae = dcount::mae(p);
  mse = dcount::mse(p);
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

EvalReport evaluate(const FcnModel& model, std::span<const DotAnnotatedImage> images, const ScaleScheme& scheme,
                    const EvalOptions& options) {
  scheme.validate();
  if (images.empty()) throw ConfigError("evaluate: no images");
  EvalReport report;
  report.scheme = scheme;
  report.images.resize(images.size());
  const int threads = std::max(1, options.threads);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto start = Clock::now();
    const double est = multiscale_count(model, images[i].pixels, scheme).count;
    report.images[i] = {images[i].id, static_cast<double>(images[i].count()), est, elapsed_ms(start)};
  }
  report.aggregate();
  return report;
}

namespace {

std::vector<DotAnnotatedImage> load_available(const DatasetManifest& manifest, std::vector<std::string>& skipped,
                                              std::ostream* warnings) {
  std::vector<DotAnnotatedImage> images;
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    try {
      images.push_back(load_annotations(manifest.resolve(i)));
    } catch (const std::exception& e) {
      skipped.push_back(manifest.samples[i].stem().string());
      if (warnings) *warnings << "warning: skipping " << manifest.samples[i].string() << ": " << e.what() << '\n';
    }
  }
  if (images.empty()) throw ConfigError("no sample in manifest '" + manifest.name + "' could be loaded");
  return images;
}

}  // namespace

EvalReport evaluate(const FcnModel& model, const DatasetManifest& manifest, const ScaleScheme& scheme,
                    const EvalOptions& options) {
  std::vector<std::string> skipped;
  const auto images = load_available(manifest, skipped, options.warnings);
  EvalReport report = evaluate(model, images, scheme, options);
  report.skipped = std::move(skipped);
  if (!report.complete()) {
    report.notes = "incomplete: " + std::to_string(report.skipped.size()) + " of " +
                   std::to_string(manifest.samples.size()) + " samples skipped";
  }
  return report;
}

void write_eval_csv(std::ostream& os, const EvalReport& report) {
  os << "id,true,estimated,latency_ms\n";
  os << std::setprecision(10);
  for (const auto& r : report.images) {
    os << r.id << ',' << r.true_count << ',' << r.estimated << ',' << std::fixed << std::setprecision(3)
       << r.latency_ms << std::defaultfloat << std::setprecision(10) << '\n';
  }
}

void save_eval_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write report " + path.string());
  write_eval_csv(os, report);
}

EvalReport load_eval_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open report " + path.string());
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line) || line != "id,true,estimated,latency_ms") {
    throw ParseError(path.string() + ": expected header 'id,true,estimated,latency_ms'", line_no);
  }
  EvalReport report;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, a, b, c;
    if (!std::getline(ss, id, ',') || !std::getline(ss, a, ',') || !std::getline(ss, b, ',') ||
        !std::getline(ss, c)) {
      throw ParseError(path.string() + ": expected 4 fields", line_no);
    }
    try {
      report.images.push_back({id, std::stod(a), std::stod(b), std::stod(c)});
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": bad numeric field", line_no);
    }
  }
  if (report.images.empty()) throw ParseError(path.string() + ": report has no rows");
  report.aggregate();
  return report;
}

double percent_increase(double cross, double baseline) { return 100.0 * (cross - baseline) / baseline; }

CrossDomainReport cross_domain_report(std::string source, std::string target, const EvalReport& cross,
                                      const EvalReport& baseline) {
  std::set<std::string> a, b;
  for (const auto& r : cross.images) a.insert(r.id);
  for (const auto& r : baseline.images) b.insert(r.id);
  if (a != b) throw ConfigError("baseline report does not cover the same images as target '" + target + "'");
  CrossDomainReport r;
  r.source = std::move(source);
  r.target = std::move(target);
  r.mae = cross.mae;
  r.mse = cross.mse;
  r.baseline_mae = baseline.mae;
  r.baseline_mse = baseline.mse;
  r.pct_increase_mae = percent_increase(r.mae, r.baseline_mae);
  r.pct_increase_mse = percent_increase(r.mse, r.baseline_mse);
  return r;
}

CrossDomainReport cross_evaluate(const FcnModel& model, const std::string& source_name,
                                 const DatasetManifest& target_manifest, const EvalReport& baseline,
                                 const ScaleScheme& scheme, const EvalOptions& options) {
  std::set<std::string> manifest_ids, baseline_ids;
  for (const auto& s : target_manifest.samples) manifest_ids.insert(s.stem().string());
  for (const auto& r : baseline.images) baseline_ids.insert(r.id);
  if (manifest_ids != baseline_ids) {
    throw ConfigError("baseline report was not computed on target manifest '" + target_manifest.name + "'");
  }
  const EvalReport cross = evaluate(model, target_manifest, scheme, options);
  if (!cross.complete()) throw ConfigError("target manifest '" + target_manifest.name + "' has unloadable samples");
  return cross_domain_report(source_name, target_manifest.name, cross, baseline);
}

namespace {

// One decimal, with negative zero printed as 0.0.
double one_decimal(double v) { return std::round(v * 10.0) / 10.0 + 0.0; }

}  // namespace

void write_cross_csv(std::ostream& os, const CrossDomainReport& r) {
  os << "source,target,mae,mse,baseline_mae,baseline_mse,pct_increase_mae,pct_increase_mse\n";
  os << r.source << ',' << r.target << ',' << std::setprecision(10) << r.mae << ',' << r.mse << ','
     << r.baseline_mae << ',' << r.baseline_mse << ',' << std::fixed << std::setprecision(1)
     << one_decimal(r.pct_increase_mae) << ',' << one_decimal(r.pct_increase_mse) << std::defaultfloat << '\n';
}

std::vector<SweepRow> speed_accuracy_sweep(const FcnModel& model, std::span<const DotAnnotatedImage> images,
                                           std::span<const double> scales) {
  if (images.empty()) throw ConfigError("speed_accuracy_sweep: no images");
  if (scales.empty()) throw ConfigError("speed_accuracy_sweep: no scales");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0 && scales[i] <= 1.0)) throw ConfigError("sweep scales must lie in (0, 1]");
    if (i > 0 && !(scales[i] < scales[i - 1])) throw ConfigError("sweep scales must be strictly descending");
  }
  std::vector<SweepRow> rows;
  for (double s : scales) {
    std::vector<CountPair> pairs;
    std::vector<double> latency;
    long double flop_sum = 0.0L;
    for (const auto& img : images) {
      const Tensor scaled = s == 1.0 ? img.pixels : bilinear_resize(img.pixels, s);
      const auto start = Clock::now();
      const double est = std::max(0.0, predict_count(model, scaled));
      latency.push_back(elapsed_ms(start));
      pairs.emplace_back(static_cast<double>(img.count()), est);
      flop_sum += static_cast<long double>(flops(model.spec(), scaled.height(), scaled.width()));
    }
    SweepRow row;
    row.scale = s;
    row.mae = mae(pairs);
    row.mse = mse(pairs);
    row.mean_latency_ms = std::accumulate(latency.begin(), latency.end(), 0.0) / static_cast<double>(latency.size());
    std::sort(latency.begin(), latency.end());
    const std::size_t m = latency.size() / 2;
    row.median_latency_ms = latency.size() % 2 ? latency[m] : 0.5 * (latency[m - 1] + latency[m]);
    row.flops = static_cast<std::uint64_t>(std::llround(flop_sum / static_cast<long double>(images.size())));
    rows.push_back(row);
  }
  return rows;
}

std::vector<SweepRow> speed_accuracy_sweep(const FcnModel& model, const DatasetManifest& manifest,
                                           std::span<const double> scales, std::ostream* warnings) {
  std::vector<std::string> skipped;
  const auto images = load_available(manifest, skipped, warnings);
  return speed_accuracy_sweep(model, images, scales);
}

void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
  os << "scale,mae,mse,latency_ms,flops\n";
  for (const auto& r : rows) {
    os << std::setprecision(10) << r.scale << ',' << r.mae << ',' << r.mse << ',' << std::fixed
       << std::setprecision(3) << r.mean_latency_ms << std::defaultfloat << ',' << r.flops << '\n';
  }
}

}  // namespace dcount
