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

// Compares the serial reference convolution kernels against the
// OpenMP-parallel paths and verifies that their outputs are bitwise equal.

#include <chrono>
#include <cstdio>
#include <vector>

#include "dpsa/nn.hpp"
#include "dpsa/rng.hpp"

using namespace dpsa;

namespace {

template <typename F>
double time_best_of(F&& f, int reps) {
  double best = 1e18;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main() {
  Rng rng(1234);
  struct Case {
    int in_ch, out_ch, width, frames;
  };
  const std::vector<Case> cases{
      {8, 8, 5, 1000}, {16, 16, 5, 2000}, {32, 32, 5, 4000}, {64, 64, 5, 4000}};

  std::printf("%-24s %12s %12s %8s %s\n", "case", "serial(ms)", "parallel(ms)", "speedup",
              "bitwise");
  for (const auto& c : cases) {
    auto layer = make_conv1d(c.in_ch, c.out_ch, c.width, Activation::Relu, rng);
    Matrix x(c.in_ch, c.frames);
    for (auto& v : x.v) v = 2.0 * rng.uniform_open() - 1.0;

    Matrix ys, yp;
    double ts = time_best_of([&] { ys = conv1d_forward_serial(layer, x); }, 5);
    double tp = time_best_of([&] { yp = conv1d_forward(layer, x, true); }, 5);
    bool equal = ys.v == yp.v;

    // Backward pass comparison on the same case.
    Matrix dy(c.out_ch, c.frames);
    for (auto& v : dy.v) v = 2.0 * rng.uniform_open() - 1.0;
    Conv1dGrad gs, gp;
    Matrix dxs, dxp;
    double tbs = time_best_of(
        [&] {
          gs = Conv1dGrad{};
          dxs = conv1d_backward(layer, x, ys, dy, gs, false);
        },
        5);
    double tbp = time_best_of(
        [&] {
          gp = Conv1dGrad{};
          dxp = conv1d_backward(layer, x, ys, dy, gp, true);
        },
        5);
    bool bequal = dxs.v == dxp.v && gs.w == gp.w && gs.b == gp.b;

    std::printf("fwd %2dx%2d w%d K=%-6d %12.3f %12.3f %7.2fx %s\n", c.in_ch, c.out_ch, c.width,
                c.frames, 1e3 * ts, 1e3 * tp, ts / tp, equal ? "yes" : "NO");
    std::printf("bwd %2dx%2d w%d K=%-6d %12.3f %12.3f %7.2fx %s\n", c.in_ch, c.out_ch, c.width,
                c.frames, 1e3 * tbs, 1e3 * tbp, tbs / tbp, bequal ? "yes" : "NO");
    if (!equal || !bequal) return 1;
  }
  return 0;
}
