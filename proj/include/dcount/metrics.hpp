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

#include <span>
#include <utility>

namespace dcount {

// (true count, estimated count)
using CountPair = std::pair<double, double>;

// Mean absolute error. Throws ConfigError on an empty set.
double mae(std::span<const CountPair> pairs);

// Root of the mean squared error; the counting literature calls this "MSE".
double mse(std::span<const CountPair> pairs);

}  // namespace dcount
