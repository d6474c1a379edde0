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
#include <stdexcept>
#include <string>

namespace dcount {

// Invalid shapes, hyperparameters, flags or config files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed annotation/manifest/image file. Carries the offending line when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A head annotation that falls outside the image it belongs to.
class AnnotationError : public std::runtime_error {
 public:
  AnnotationError(const std::string& what, std::size_t head_index)
      : std::runtime_error(what + " (head " + std::to_string(head_index) + ")"), head_index_(head_index) {}
  std::size_t head_index() const { return head_index_; }

 private:
  std::size_t head_index_;
};

class AugmentationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InferenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(std::uint64_t iteration)
      : std::runtime_error("training diverged: non-finite loss at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  std::uint64_t iteration() const { return iteration_; }

 private:
  std::uint64_t iteration_;
};

}  // namespace dcount
