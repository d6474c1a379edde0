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

#include "dcount/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "dcount/errors.hpp"

namespace dcount {
namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& is, const std::filesystem::path& path) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw ParseError("truncated netpbm header in " + path.string());
  return tok;
}

std::size_t header_number(std::istream& is, const std::filesystem::path& path) {
  const std::string tok = header_token(is, path);
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad netpbm header field '" + tok + "' in " + path.string());
  }
}

}  // namespace

Tensor read_netpbm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open image " + path.string());
  const std::string magic = header_token(is, path);
  std::size_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw ParseError("unsupported image format '" + magic + "' in " + path.string() + " (expected P5 or P6)");
  }
  const std::size_t width = header_number(is, path);
  const std::size_t height = header_number(is, path);
  const std::size_t maxval = header_number(is, path);
  if (width == 0 || height == 0 || maxval == 0 || maxval > 65535) {
    throw ParseError("invalid netpbm dimensions or maxval in " + path.string());
  }
  // header_token consumed the single whitespace byte after maxval.
  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  const std::size_t samples = width * height * channels;
  std::vector<unsigned char> raw(samples * bytes_per_sample);
  if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw ParseError("truncated pixel data in " + path.string());
  }
  Tensor image = Tensor::chw(channels, height, width);
  const auto denom = static_cast<float>(maxval);
  for (std::size_t i = 0; i < width * height; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t s = i * channels + c;
      const unsigned v = bytes_per_sample == 1 ? raw[s] : (unsigned{raw[2 * s]} << 8) | raw[2 * s + 1];
      image[c * width * height + i] = std::min(1.0f, static_cast<float>(v) / denom);
    }
  }
  return image;
}

void write_netpbm(const Tensor& image, const std::filesystem::path& path) {
  if (image.rank() != 3 || (image.channels() != 1 && image.channels() != 3)) {
    throw ConfigError("write_netpbm needs a 1- or 3-channel image, got " + image.shape_string());
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write image " + path.string());
  const std::size_t channels = image.channels(), height = image.height(), width = image.width();
  os << (channels == 1 ? "P5" : "P6") << '\n' << width << ' ' << height << "\n255\n";
  std::vector<unsigned char> raw(width * height * channels);
  for (std::size_t i = 0; i < width * height; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const float v = std::clamp(image[c * width * height + i], 0.0f, 1.0f);
      raw[i * channels + c] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
  }
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!os) throw IoError("failed writing image " + path.string());
}

void quantize_8bit(Tensor& image) {
  for (float& v : image.storage()) {
    v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
  }
}

}  // namespace dcount
