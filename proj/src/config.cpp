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

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dcount/errors.hpp"
#include "dcount/trainer.hpp"

namespace dcount {

void TrainConfig::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(base_lr, "base_lr");
  positive(lr_drop_factor, "lr_drop_factor");
  positive(init_std, "init_std");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (total_iters < 1) throw ConfigError("total_iters must be >= 1");
  if (validate_every < 1) throw ConfigError("validate_every must be >= 1");
}

TrainConfig TrainConfig::paper_sht() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.init = InitScheme::he;
  c.base_lr = 1e-5;
  c.lr_drop_at_iter = 15'000;
  c.total_iters = 20'000;
  c.checkpoint_every = 5'000;
  c.validate_every = 1'000;
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, std::size_t line) {
  std::istringstream is(value);
  double v = 0.0;
  std::string rest;
  if (!(is >> v) || (is >> rest)) throw ParseError("config key '" + key + "': bad number '" + value + "'", line);
  if constexpr (std::is_integral_v<T>) {
    if (v < 0.0 || v != std::floor(v) || v > 1.8e19) {
      throw ParseError("config key '" + key + "': expected a non-negative integer, got '" + value + "'", line);
    }
  }
  return static_cast<T>(v);
}

}  // namespace

TrainConfig parse_train_config(std::istream& is) {
  std::vector<std::tuple<std::string, std::string, std::size_t>> entries;
  std::string line;
  std::size_t line_no = 0;
  TrainConfig config;
  bool have_seed = false;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line must be 'key = value'", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "preset") {
      if (value == "paper-sht") {
        config = TrainConfig::paper_sht();
      } else if (value == "desk") {
        config = TrainConfig::desk();
      } else {
        throw ParseError("unknown preset '" + value + "' (paper-sht, desk)", line_no);
      }
      continue;
    }
    entries.emplace_back(key, value, line_no);
  }

  using Setter = std::function<void(const std::string&, const std::string&, std::size_t)>;
  const std::map<std::string, Setter> setters = {
      {"base_lr", [&](auto& k, auto& v, auto n) { config.base_lr = parse_number<double>(k, v, n); }},
      {"lr_drop_factor", [&](auto& k, auto& v, auto n) { config.lr_drop_factor = parse_number<double>(k, v, n); }},
      {"lr_drop_at_iter",
       [&](auto& k, auto& v, auto n) { config.lr_drop_at_iter = parse_number<std::uint64_t>(k, v, n); }},
      {"total_iters", [&](auto& k, auto& v, auto n) { config.total_iters = parse_number<std::uint64_t>(k, v, n); }},
      {"momentum", [&](auto& k, auto& v, auto n) { config.momentum = parse_number<double>(k, v, n); }},
      {"weight_decay", [&](auto& k, auto& v, auto n) { config.weight_decay = parse_number<double>(k, v, n); }},
      {"batch_size", [&](auto& k, auto& v, auto n) { config.batch_size = parse_number<std::size_t>(k, v, n); }},
      {"init_std", [&](auto& k, auto& v, auto n) { config.init_std = parse_number<double>(k, v, n); }},
      {"seed",
       [&](auto& k, auto& v, auto n) {
         config.seed = parse_number<std::uint64_t>(k, v, n);
         have_seed = true;
       }},
      {"checkpoint_every",
       [&](auto& k, auto& v, auto n) { config.checkpoint_every = parse_number<std::uint64_t>(k, v, n); }},
      {"validate_every",
       [&](auto& k, auto& v, auto n) { config.validate_every = parse_number<std::uint64_t>(k, v, n); }},
      {"init",
       [&](auto&, auto& v, auto n) {
         if (v == "fixed") {
           config.init = InitScheme::fixed;
         } else if (v == "he") {
           config.init = InitScheme::he;
         } else {
           throw ParseError("init must be 'fixed' or 'he', got '" + v + "'", n);
         }
       }},
      {"augmentation",
       [&](auto&, auto& v, auto n) {
         try {
           config.augmentation = parse_augmentation(v);
         } catch (const ConfigError& e) {
           throw ParseError(e.what(), n);
         }
       }},
  };
  for (const auto& [key, value, n] : entries) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ParseError("unknown config key '" + key + "'", n);
    it->second(key, value, n);
  }
  if (!have_seed) throw ConfigError("config must set 'seed' explicitly");
  config.validate();
  return config;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  try {
    return parse_train_config(is);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "base_lr = " << c.base_lr << '\n'
     << "lr_drop_factor = " << c.lr_drop_factor << '\n'
     << "lr_drop_at_iter = " << c.lr_drop_at_iter << '\n'
     << "total_iters = " << c.total_iters << '\n'
     << "momentum = " << c.momentum << '\n'
     << "weight_decay = " << c.weight_decay << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "init = " << (c.init == InitScheme::he ? "he" : "fixed") << '\n'
     << "init_std = " << c.init_std << '\n'
     << "seed = " << c.seed << '\n'
     << "checkpoint_every = " << c.checkpoint_every << '\n'
     << "validate_every = " << c.validate_every << '\n'
     << "augmentation = " << to_string(c.augmentation) << '\n';
  return os.str();
}

}  // namespace dcount
