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

#ifndef DPSA_NN_HPP
#define DPSA_NN_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "dpsa/rng.hpp"

namespace dpsa {

/// Dense row-major matrix. For sequence data rows are channels and columns
/// are time frames.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return v.size(); }
};

Matrix transpose(const Matrix& m);

enum class Activation { Linear, Sigmoid, Relu, Tanh };

double apply_activation(Activation a, double x);
double activation_grad_from_output(Activation a, double y);  // d act / d pre, from act output

/// Stride-1 same-length 1-D convolution over time with symmetric zero padding.
/// A width of 1 makes this a per-frame affine (dense) layer.
struct Conv1d {
  int in_ch = 0;
  int out_ch = 0;
  int width = 1;  // odd
  Activation act = Activation::Linear;
  std::vector<double> w;  // out_ch * in_ch * width
  std::vector<double> b;  // out_ch

  double& wt(int oc, int ic, int k) { return w[(static_cast<std::size_t>(oc) * in_ch + ic) * width + k]; }
  double wt(int oc, int ic, int k) const {
    return w[(static_cast<std::size_t>(oc) * in_ch + ic) * width + k];
  }
};

/// Uniform +-1/sqrt(fan_in) initialization.
Conv1d make_conv1d(int in_ch, int out_ch, int width, Activation act, Rng& rng);

/// Forward pass; optionally parallelized over output entries with OpenMP.
/// The serial and parallel paths compute each output entry with an identical
/// serial reduction, so results are bitwise equal.
Matrix conv1d_forward(const Conv1d& layer, const Matrix& x, bool parallel = true);
/// Plain triple-loop reference used by tests and the kernel benchmark.
Matrix conv1d_forward_serial(const Conv1d& layer, const Matrix& x);

struct Conv1dGrad {
  std::vector<double> w;
  std::vector<double> b;
};

/// Backward pass given the activated output y and the loss gradient w.r.t. y.
/// Accumulates parameter gradients into grad and returns d loss / d x.
Matrix conv1d_backward(const Conv1d& layer, const Matrix& x, const Matrix& y, const Matrix& dy,
                       Conv1dGrad& grad, bool parallel = true);

/// Adam state for one flat parameter vector.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;  // L2 term added to the gradient
};

/// One Adam step on params, t counting from 1.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg, std::uint64_t t);

/// Inverted-scaling Bernoulli dropout mask: entries are 0 with probability
/// `rate`, otherwise 1/(1-rate).
std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng);

}  // namespace dpsa

#endif  // DPSA_NN_HPP
