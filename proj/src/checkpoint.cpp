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

#include "dcount/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include <zlib.h>

#include "binary_io.hpp"
#include "dcount/errors.hpp"

namespace dcount {
namespace {

constexpr char kMagic[4] = {'F', 'C', 'N', 'C'};
constexpr std::uint16_t kVersion = 1;

std::uint32_t crc_of(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

void write_checkpoint(std::ostream& os, const FcnModel& model, const TrainingProgress& progress) {
  std::ostringstream payload(std::ios::binary);
  detail::put<std::uint64_t>(payload, progress.iteration);
  detail::put<std::uint64_t>(payload, progress.seed);
  for (const auto& p : model.convs()) {
    detail::put_floats(payload, p.weights.values());
    detail::put_floats(payload, p.bias);
    detail::put_floats(payload, p.weight_velocity.values());
    detail::put_floats(payload, p.bias_velocity);
  }
  const std::string bytes = payload.str();

  os.write(kMagic, 4);
  detail::put<std::uint16_t>(os, kVersion);
  const auto& layers = model.spec().layers;
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(l.kind));
    detail::put<std::uint8_t>(os, l.relu ? 1 : 0);
    detail::put<std::uint16_t>(os, static_cast<std::uint16_t>(l.kernel));
    detail::put<std::uint32_t>(os, l.in_channels);
    detail::put<std::uint32_t>(os, l.out_channels);
  }
  detail::put<std::uint32_t>(os, crc_of(bytes));
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint read_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw CheckpointError("not an FCNC checkpoint");
  const auto version = detail::get<std::uint16_t, CheckpointError>(is, "checkpoint version");
  if (version != kVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kVersion) + ")");
  }
  const auto n_layers = detail::get<std::uint32_t, CheckpointError>(is, "layer count");
  if (n_layers == 0 || n_layers > 1024) throw CheckpointError("implausible layer count " + std::to_string(n_layers));
  ArchitectureSpec spec;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec l;
    const auto kind = detail::get<std::uint8_t, CheckpointError>(is, "layer kind");
    if (kind > 1) throw CheckpointError("unknown layer kind " + std::to_string(kind));
    l.kind = static_cast<LayerSpec::Kind>(kind);
    l.relu = detail::get<std::uint8_t, CheckpointError>(is, "layer relu flag") != 0;
    l.kernel = detail::get<std::uint16_t, CheckpointError>(is, "layer kernel");
    l.in_channels = detail::get<std::uint32_t, CheckpointError>(is, "layer input channels");
    l.out_channels = detail::get<std::uint32_t, CheckpointError>(is, "layer output channels");
    spec.layers.push_back(l);
  }
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint architecture is invalid: ") + e.what());
  }
  const auto stored_crc = detail::get<std::uint32_t, CheckpointError>(is, "checksum");

  const std::size_t expected = 16 + count_params(spec) * 2 * sizeof(float);
  std::string bytes(expected, '\0');
  if (!is.read(bytes.data(), static_cast<std::streamsize>(expected))) {
    throw CheckpointError("checkpoint is truncated: expected " + std::to_string(expected) + " payload bytes");
  }
  if (is.peek() != std::char_traits<char>::eof()) throw CheckpointError("checkpoint has trailing bytes");
  if (crc_of(bytes) != stored_crc) throw CheckpointError("checkpoint checksum mismatch (file corrupted)");

  std::istringstream payload(bytes, std::ios::binary);
  Checkpoint ck{FcnModel(spec), {}};
  ck.progress.iteration = detail::get<std::uint64_t, CheckpointError>(payload, "iteration");
  ck.progress.seed = detail::get<std::uint64_t, CheckpointError>(payload, "seed");
  for (auto& p : ck.model.convs()) {
    detail::get_floats<CheckpointError>(payload, p.weights.values(), "weights");
    detail::get_floats<CheckpointError>(payload, p.bias, "bias");
    detail::get_floats<CheckpointError>(payload, p.weight_velocity.values(), "weight velocity");
    detail::get_floats<CheckpointError>(payload, p.bias_velocity, "bias velocity");
  }
  return ck;
}

void save_checkpoint(const FcnModel& model, const std::filesystem::path& path, const TrainingProgress& progress) {
  // path only ever holds a complete checkpoint.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint " + tmp.string());
    write_checkpoint(os, model, progress);
    if (!os) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint_with_progress(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_checkpoint(is);
}

FcnModel load_checkpoint(const std::filesystem::path& path) { return load_checkpoint_with_progress(path).model; }

}  // namespace dcount
