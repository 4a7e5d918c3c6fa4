// Copyright 2026 The dpsa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpsa/nn.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"

using namespace dpsa;

namespace {

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (auto& v : m.v) v = 2.0 * rng.uniform_open() - 1.0;
  return m;
}

}  // namespace

TEST_CASE("conv1d same-length padding preserves frame count") {
  Rng rng(1);
  auto layer = make_conv1d(3, 4, 5, Activation::Sigmoid, rng);
  for (int k : {5, 17, 147}) {
    auto x = random_matrix(3, k, rng);
    auto y = conv1d_forward(layer, x);
    CHECK(y.rows == 4);
    CHECK(y.cols == k);
  }
}

TEST_CASE("conv1d parallel and serial paths are bitwise equal") {
  Rng rng(2);
  auto layer = make_conv1d(6, 8, 5, Activation::Relu, rng);
  auto x = random_matrix(6, 200, rng);
  auto par = conv1d_forward(layer, x, true);
  auto ser = conv1d_forward_serial(layer, x);
  CHECK(par.v == ser.v);
}

TEST_CASE("width-1 conv is a per-frame affine map") {
  Rng rng(3);
  auto layer = make_conv1d(2, 1, 1, Activation::Linear, rng);
  layer.wt(0, 0, 0) = 2.0;
  layer.wt(0, 1, 0) = -1.0;
  layer.b[0] = 0.5;
  Matrix x(2, 3);
  x.at(0, 0) = 1;
  x.at(0, 1) = 2;
  x.at(0, 2) = 3;
  x.at(1, 0) = 4;
  x.at(1, 1) = 5;
  x.at(1, 2) = 6;
  auto y = conv1d_forward(layer, x);
  CHECK(y.at(0, 0) == doctest::Approx(2 * 1 - 4 + 0.5));
  CHECK(y.at(0, 1) == doctest::Approx(2 * 2 - 5 + 0.5));
  CHECK(y.at(0, 2) == doctest::Approx(2 * 3 - 6 + 0.5));
}

TEST_CASE("known 1x1-channel convolution with explicit kernel") {
  Conv1d layer;
  layer.in_ch = 1;
  layer.out_ch = 1;
  layer.width = 3;
  layer.act = Activation::Linear;
  layer.w = {1.0, 2.0, 3.0};  // taps at offsets -1, 0, +1
  layer.b = {0.0};
  Matrix x(1, 4);
  x.v = {1, 2, 3, 4};
  auto y = conv1d_forward(layer, x);
  // Zero padding at the borders.
  CHECK(y.v[0] == doctest::Approx(0 * 1 + 1 * 2 + 2 * 3));
  CHECK(y.v[1] == doctest::Approx(1 * 1 + 2 * 2 + 3 * 3));
  CHECK(y.v[2] == doctest::Approx(2 * 1 + 3 * 2 + 4 * 3));
  CHECK(y.v[3] == doctest::Approx(3 * 1 + 4 * 2 + 0 * 3));
}

TEST_CASE("conv1d backward matches central finite differences") {
  Rng rng(5);
  for (int inst = 0; inst < 3; ++inst) {
    auto act = inst == 0 ? Activation::Sigmoid : inst == 1 ? Activation::Tanh : Activation::Linear;
    auto layer = make_conv1d(2, 3, 3, act, rng);
    auto x = random_matrix(2, 9, rng);
    auto dy = random_matrix(3, 9, rng);  // arbitrary upstream gradient

    auto loss = [&](const Conv1d& l, const Matrix& in) {
      auto y = conv1d_forward(l, in, false);
      double s = 0.0;
      for (std::size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * dy.v[i];
      return s;
    };

    auto y = conv1d_forward(layer, x, false);
    Conv1dGrad grad;
    grad.w.assign(layer.w.size(), 0.0);
    grad.b.assign(layer.b.size(), 0.0);
    auto dx = conv1d_backward(layer, x, y, dy, grad);

    const double h = 1e-5;
    for (std::size_t i = 0; i < layer.w.size(); ++i) {
      auto lp = layer, lm = layer;
      lp.w[i] += h;
      lm.w[i] -= h;
      double fd = (loss(lp, x) - loss(lm, x)) / (2 * h);
      CHECK(grad.w[i] == doctest::Approx(fd).epsilon(1e-4));
    }
    for (std::size_t i = 0; i < layer.b.size(); ++i) {
      auto lp = layer, lm = layer;
      lp.b[i] += h;
      lm.b[i] -= h;
      double fd = (loss(lp, x) - loss(lm, x)) / (2 * h);
      CHECK(grad.b[i] == doctest::Approx(fd).epsilon(1e-4));
    }
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      auto xp = x, xm = x;
      xp.v[i] += h;
      xm.v[i] -= h;
      double fd = (loss(layer, xp) - loss(layer, xm)) / (2 * h);
      CHECK(dx.v[i] == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("backward parallel and serial paths agree bitwise") {
  Rng rng(6);
  auto layer = make_conv1d(4, 4, 5, Activation::Sigmoid, rng);
  auto x = random_matrix(4, 60, rng);
  auto y = conv1d_forward(layer, x, false);
  auto dy = random_matrix(4, 60, rng);
  Conv1dGrad g1, g2;
  g1.w.assign(layer.w.size(), 0.0);
  g1.b.assign(layer.b.size(), 0.0);
  g2 = g1;
  auto dx1 = conv1d_backward(layer, x, y, dy, g1, true);
  auto dx2 = conv1d_backward(layer, x, y, dy, g2, false);
  CHECK(dx1.v == dx2.v);
  CHECK(g1.w == g2.w);
  CHECK(g1.b == g2.b);
}

TEST_CASE("activation gradients from outputs") {
  CHECK(activation_grad_from_output(Activation::Linear, 0.37) == 1.0);
  double s = apply_activation(Activation::Sigmoid, 0.3);
  CHECK(activation_grad_from_output(Activation::Sigmoid, s) == doctest::Approx(s * (1 - s)));
  double t = apply_activation(Activation::Tanh, -0.8);
  CHECK(activation_grad_from_output(Activation::Tanh, t) == doctest::Approx(1 - t * t));
  CHECK(activation_grad_from_output(Activation::Relu, 2.5) == 1.0);
  CHECK(activation_grad_from_output(Activation::Relu, 0.0) == 0.0);
}

TEST_CASE("adam converges on a quadratic") {
  std::vector<double> params{5.0, -3.0};
  AdamState state;
  state.m.assign(2, 0.0);
  state.v.assign(2, 0.0);
  AdamConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.0;
  for (std::uint64_t t = 1; t <= 2000; ++t) {
    std::vector<double> g{2 * params[0], 2 * params[1]};
    adam_step(params, g, state, cfg, t);
  }
  CHECK(std::fabs(params[0]) < 1e-3);
  CHECK(std::fabs(params[1]) < 1e-3);
}

TEST_CASE("adam first step magnitude is lr for any gradient scale") {
  // With bias correction, |step 1| = lr regardless of gradient magnitude.
  for (double g0 : {1e-4, 1.0, 1e4}) {
    std::vector<double> params{0.0};
    AdamState state;
    state.m.assign(1, 0.0);
    state.v.assign(1, 0.0);
    AdamConfig cfg;
    cfg.lr = 1e-3;
    cfg.weight_decay = 0.0;
    std::vector<double> g{g0};
    adam_step(params, g, state, cfg, 1);
    CHECK(std::fabs(params[0]) == doctest::Approx(cfg.lr).epsilon(1e-3));
  }
}

TEST_CASE("dropout mask statistics and determinism") {
  Rng a(8), b(8);
  auto m1 = dropout_mask(100000, 0.2, a);
  auto m2 = dropout_mask(100000, 0.2, b);
  CHECK(m1 == m2);
  int zeros = 0;
  for (double v : m1) {
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.8)));
    zeros += v == 0.0;
  }
  CHECK(zeros == doctest::Approx(20000).epsilon(0.05));
  Rng c(9);
  auto none = dropout_mask(100, 0.0, c);
  for (double v : none) CHECK(v == 1.0);
}

TEST_CASE("transpose") {
  Matrix m(2, 3);
  m.v = {1, 2, 3, 4, 5, 6};
  auto t = transpose(m);
  CHECK(t.rows == 3);
  CHECK(t.cols == 2);
  CHECK(t.at(0, 0) == 1);
  CHECK(t.at(0, 1) == 4);
  CHECK(t.at(2, 1) == 6);
  auto tt = transpose(t);
  CHECK(tt.v == m.v);
}
