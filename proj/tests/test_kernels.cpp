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
#include <random>

#include <omp.h>

#include "doctest.h"
#include "dcount/errors.hpp"
#include "dcount/kernels.hpp"
#include "dcount/reference.hpp"
#include "support.hpp"

using namespace dcount;
using namespace dcount::nn;
using dcount::testing::random_tensor;
using dcount::testing::relative_error;
using dcount::testing::to_vector;

namespace {

ConvLayerParams random_params(std::size_t out, std::size_t in, std::size_t k, std::uint64_t seed) {
  auto p = ConvLayerParams::zeros(out, in, k);
  p.weights = random_tensor({out, in, k, k}, seed, -0.3f, 0.3f);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  for (auto& b : p.bias) b = u(rng);
  return p;
}

}  // namespace

TEST_CASE("conv2d identity and constant examples") {
  auto p = ConvLayerParams::zeros(1, 1, 1);
  p.weights[0] = 1.0f;
  const auto x = random_tensor({1, 6, 5}, 3);
  CHECK(conv2d_forward(x, p) == x);

  auto ones = ConvLayerParams::zeros(1, 1, 3);
  ones.weights.fill(1.0f);
  const auto out = conv2d_forward(Tensor::chw(1, 5, 5, 2.0f), ones);
  CHECK(out.at(0, 2, 2) == doctest::Approx(18.0));
  CHECK(out.at(0, 0, 0) == doctest::Approx(8.0));
}

TEST_CASE("conv2d forward matches the nested-loop oracle") {
  for (std::size_t k : {1u, 3u, 5u, 7u, 9u}) {
    CAPTURE(k);
    const auto x = random_tensor({3, 11, 13}, 10 + k);
    const auto p = random_params(4, 3, k, 20 + k);
    const auto got = conv2d_forward(x, p);
    const auto want = reference::conv2d_forward(to_vector<double>(x), 3, 11, 13, to_vector<double>(p.weights),
                                                std::vector<double>(p.bias.begin(), p.bias.end()), 4, k);
    REQUIRE(got.dims() == std::vector<std::size_t>{4, 11, 13});
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-5));
  }
}

TEST_CASE("conv2d rejects bad shapes") {
  CHECK_THROWS_AS(conv2d_forward(Tensor::chw(2, 4, 4), ConvLayerParams::zeros(1, 3, 3)), ConfigError);
  CHECK_THROWS_AS(conv2d_forward(Tensor::chw(1, 4, 4), ConvLayerParams::zeros(1, 1, 4)), ConfigError);
  const auto p = ConvLayerParams::zeros(2, 1, 3);
  CHECK_THROWS_AS(conv2d_backward(Tensor::chw(1, 4, 4), p, Tensor::chw(2, 4, 5)), ConfigError);
}

TEST_CASE("conv2d is linear in its input") {
  auto p = random_params(3, 2, 5, 7);
  std::fill(p.bias.begin(), p.bias.end(), 0.0f);
  const auto x = random_tensor({2, 9, 8}, 1), y = random_tensor({2, 9, 8}, 2);
  const float a = 0.7f, b = -1.3f;
  Tensor mix(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * y[i];
  const auto fx = conv2d_forward(x, p), fy = conv2d_forward(y, p), fm = conv2d_forward(mix, p);
  double scale = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < fm.size(); ++i) {
    scale = std::max(scale, std::abs(double(fm[i])));
    worst = std::max(worst, std::abs(double(fm[i]) - (a * double(fx[i]) + b * double(fy[i]))));
  }
  CHECK(worst / scale < 1e-5);
}

TEST_CASE("conv2d backward with zero upstream gives zero gradients") {
  const auto x = random_tensor({2, 6, 6}, 4);
  const auto p = random_params(3, 2, 3, 5);
  const auto g = conv2d_backward(x, p, Tensor::chw(3, 6, 6));
  for (float v : g.weights.values()) CHECK(v == 0.0f);
  for (float v : g.bias) CHECK(v == 0.0f);
  for (float v : g.input.values()) CHECK(v == 0.0f);
}

TEST_CASE("conv2d backward matches the reference and finite differences") {
  // The loss is <R, conv(x)> for a fixed random R, so dL/dout = R. Finite
  // differences run on the double-precision reference.
  for (std::size_t k : {9u, 7u, 5u, 1u}) {
    CAPTURE(k);
    const std::size_t c = 2, o = 3, h = 10, w = 9;
    const auto x = random_tensor({c, h, w}, 100 + k);
    const auto p = random_params(o, c, k, 200 + k);
    const auto r = random_tensor({o, h, w}, 300 + k);
    const auto g = conv2d_backward(x, p, r);

    auto xd = to_vector<double>(x), wd = to_vector<double>(p.weights), rd = to_vector<double>(r);
    std::vector<double> bd(p.bias.begin(), p.bias.end());
    const auto ref = reference::conv2d_backward(xd, c, h, w, wd, o, k, rd);
    for (std::size_t i = 0; i < ref.weights.size(); ++i) CHECK(g.weights[i] == doctest::Approx(ref.weights[i]).epsilon(1e-4));
    for (std::size_t i = 0; i < ref.input.size(); ++i) CHECK(g.input[i] == doctest::Approx(ref.input[i]).epsilon(1e-4));
    for (std::size_t i = 0; i < o; ++i) CHECK(g.bias[i] == doctest::Approx(ref.bias[i]).epsilon(1e-4));

    auto loss = [&] {
      const auto out = reference::conv2d_forward(xd, c, h, w, wd, bd, o, k);
      double s = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * rd[i];
      return s;
    };
    const double step = 1e-3;
    auto numeric = [&](double& v) {
      const double saved = v;
      v = saved + step;
      const double up = loss();
      v = saved - step;
      const double down = loss();
      v = saved;
      return (up - down) / (2 * step);
    };
    double worst = 0.0;
    std::mt19937_64 pick(k);
    for (int t = 0; t < 40; ++t) {
      const std::size_t wi = pick() % wd.size(), ii = pick() % xd.size();
      worst = std::max(worst, relative_error(g.weights[wi], numeric(wd[wi])));
      worst = std::max(worst, relative_error(g.input[ii], numeric(xd[ii])));
    }
    for (std::size_t i = 0; i < o; ++i) worst = std::max(worst, relative_error(g.bias[i], numeric(bd[i])));
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("conv2d results do not depend on thread count") {
  const auto x = random_tensor({4, 37, 29}, 8);
  const auto p = random_params(6, 4, 7, 9);
  const auto r = random_tensor({6, 37, 29}, 10);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto f1 = conv2d_forward(x, p);
  const auto g1 = conv2d_backward(x, p, r);
  omp_set_num_threads(4);
  const auto f4 = conv2d_forward(x, p);
  const auto g4 = conv2d_backward(x, p, r);
  omp_set_num_threads(saved);
  CHECK(f1 == f4);
  CHECK(g1.weights == g4.weights);
  CHECK(g1.input == g4.input);
  CHECK(g1.bias == g4.bias);
}

TEST_CASE("relu examples and properties") {
  const Tensor x({3}, std::vector<float>{-1.0f, 0.0f, 2.5f});
  CHECK(relu(x).storage() == std::vector<float>{0.0f, 0.0f, 2.5f});
  CHECK(relu(Tensor({4}, -3.0f)) == Tensor({4}, 0.0f));
  const Tensor in({2}, std::vector<float>{-1.0f, 2.0f});
  CHECK(relu_backward(in, Tensor({2}, 5.0f)).storage() == std::vector<float>{0.0f, 5.0f});
  CHECK(relu_backward(Tensor({1}, 0.0f), Tensor({1}, 1.0f))[0] == 0.0f);

  const auto r = random_tensor({2, 7, 7}, 11);
  CHECK(relu(relu(r)) == relu(r));
  auto inplace = r;
  relu_inplace(inplace);
  CHECK(inplace == relu(r));
}

TEST_CASE("maxpool2 examples") {
  const Tensor x({1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  const auto p = maxpool2(x);
  CHECK(p.output.storage() == std::vector<float>{4.0f});
  CHECK(p.argmax == std::vector<std::uint32_t>{3});

  CHECK(maxpool2(Tensor::chw(2, 3, 3)).output.dims() == std::vector<std::size_t>{2, 2, 2});

  const auto c = maxpool2(Tensor::chw(1, 4, 4, 1.5f));
  for (float v : c.output.values()) CHECK(v == 1.5f);
  CHECK(c.argmax == std::vector<std::uint32_t>{0, 2, 8, 10});
  const auto back = maxpool2_backward({1, 4, 4}, c.argmax, Tensor::chw(1, 2, 2, 1.0f));
  CHECK(back.sum() == 4.0);
  CHECK(back[0] == 1.0f);
  CHECK(back[1] == 0.0f);
  CHECK(back[5] == 0.0f);
}

TEST_CASE("maxpool2 matches the reference and keeps max, shrinks sum") {
  const auto x = random_tensor({3, 9, 7}, 12, 0.0f, 1.0f);
  const auto p = maxpool2(x);
  const auto ref = reference::maxpool2(to_vector<float>(x), 3, 9, 7);
  REQUIRE(p.output.dims() == std::vector<std::size_t>{3, 5, 4});
  CHECK(p.output.storage() == ref.values);
  for (std::size_t i = 0; i < ref.argmax.size(); ++i) CHECK(p.argmax[i] == ref.argmax[i]);
  CHECK(p.output.sum() <= x.sum());
  CHECK(*std::max_element(p.output.values().begin(), p.output.values().end()) ==
        *std::max_element(x.values().begin(), x.values().end()));

  const auto up = random_tensor({3, 5, 4}, 13);
  const auto g = maxpool2_backward(x.dims(), p.argmax, up);
  CHECK(g.storage() == reference::maxpool2_backward(x.size(), ref.argmax, to_vector<float>(up)));
}

TEST_CASE("gaussian_init is seeded and has the requested spread") {
  const auto a = gaussian_init({64, 32, 7, 7}, 0.01f, 42);
  CHECK(a == gaussian_init({64, 32, 7, 7}, 0.01f, 42));
  CHECK_FALSE(a == gaussian_init({64, 32, 7, 7}, 0.01f, 43));
  double mean = 0.0, sq = 0.0;
  for (float v : a.values()) {
    mean += v;
    sq += double(v) * v;
  }
  mean /= a.size();
  const double sd = std::sqrt(sq / a.size() - mean * mean);
  CHECK(std::abs(mean) < 2e-4);
  CHECK(sd == doctest::Approx(0.01).epsilon(0.02));
  CHECK_THROWS_AS(gaussian_init({3}, 0.0f, 1), ConfigError);
  CHECK_THROWS_AS(gaussian_init({3}, -1.0f, 1), ConfigError);
}

TEST_CASE("sgd_step arithmetic") {
  auto p = ConvLayerParams::zeros(1, 1, 1);
  p.weights[0] = 1.0f;
  ConvGrads g{Tensor({1, 1, 1, 1}, 0.5f), {0.0f}, {}};
  sgd_step(p, g, {.learning_rate = 0.1f, .momentum = 0.0f, .weight_decay = 0.0f});
  CHECK(p.weights[0] == doctest::Approx(0.95));

  auto q = ConvLayerParams::zeros(1, 1, 1);
  q.weights[0] = 1.0f;
  ConvGrads one{Tensor({1, 1, 1, 1}, 1.0f), {0.0f}, {}};
  const SgdSettings s{.learning_rate = 0.1f, .momentum = 0.9f, .weight_decay = 0.0f};
  sgd_step(q, one, s);
  CHECK(q.weight_velocity[0] == doctest::Approx(0.1));
  sgd_step(q, one, s);
  CHECK(q.weight_velocity[0] == doctest::Approx(0.19));
  CHECK(q.weights[0] == doctest::Approx(0.71));

  auto decay = ConvLayerParams::zeros(1, 1, 1);
  decay.weights[0] = 2.0f;
  decay.bias[0] = 4.0f;
  sgd_step(decay, ConvGrads{Tensor({1, 1, 1, 1}), {0.0f}, {}}, {.learning_rate = 0.5f, .momentum = 0.0f, .weight_decay = 0.1f});
  CHECK(decay.weights[0] == doctest::Approx(1.9));
  CHECK(decay.bias[0] == doctest::Approx(3.8));
}

TEST_CASE("sgd_step identities and errors") {
  auto p = random_params(2, 3, 3, 14);
  const auto before = p;
  ConvGrads zero{Tensor({2, 3, 3, 3}), {0.0f, 0.0f}, {}};
  sgd_step(p, zero, {.learning_rate = 0.1f, .momentum = 0.9f, .weight_decay = 0.0f});
  CHECK(p.weights == before.weights);
  CHECK(p.bias == before.bias);

  ConvGrads g{random_tensor({2, 3, 3, 3}, 15), {0.3f, -0.2f}, {}};
  sgd_step(p, g, {.learning_rate = 0.0f, .momentum = 0.9f, .weight_decay = 0.0005f});
  CHECK(p.weights == before.weights);
  CHECK(p.bias == before.bias);

  ConvGrads bad{Tensor({2, 3, 5, 5}), {0.0f, 0.0f}, {}};
  CHECK_THROWS_AS(sgd_step(p, bad, {}), ConfigError);
}
