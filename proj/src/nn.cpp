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
#include <stdexcept>

namespace dpsa {

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) t.at(c, r) = m.at(r, c);
  }
  return t;
}

double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::Linear:
      return x;
    case Activation::Sigmoid:
      return 1.0 / (1.0 + std::exp(-x));
    case Activation::Relu:
      return x > 0.0 ? x : 0.0;
    case Activation::Tanh:
      return std::tanh(x);
  }
  return x;
}

double activation_grad_from_output(Activation a, double y) {
  switch (a) {
    case Activation::Linear:
      return 1.0;
    case Activation::Sigmoid:
      return y * (1.0 - y);
    case Activation::Relu:
      return y > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh:
      return 1.0 - y * y;
  }
  return 1.0;
}

Conv1d make_conv1d(int in_ch, int out_ch, int width, Activation act, Rng& rng) {
  if (in_ch < 1 || out_ch < 1 || width < 1 || width % 2 == 0) {
    throw std::invalid_argument("make_conv1d: bad shape (width must be odd and positive)");
  }
  Conv1d layer;
  layer.in_ch = in_ch;
  layer.out_ch = out_ch;
  layer.width = width;
  layer.act = act;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch) * width);
  layer.w.resize(static_cast<std::size_t>(out_ch) * in_ch * width);
  for (auto& x : layer.w) x = (2.0 * rng.uniform_open() - 1.0) * bound;
  layer.b.assign(out_ch, 0.0);
  return layer;
}

namespace {

inline double conv_entry(const Conv1d& layer, const Matrix& x, int oc, int t) {
  const int half = layer.width / 2;
  double acc = layer.b[oc];
  for (int ic = 0; ic < layer.in_ch; ++ic) {
    const double* row = &x.v[static_cast<std::size_t>(ic) * x.cols];
    const double* wk = &layer.w[(static_cast<std::size_t>(oc) * layer.in_ch + ic) * layer.width];
    for (int k = 0; k < layer.width; ++k) {
      int src = t + k - half;
      if (src >= 0 && src < x.cols) acc += wk[k] * row[src];
    }
  }
  return acc;
}

}  // namespace

Matrix conv1d_forward_serial(const Conv1d& layer, const Matrix& x) {
  if (x.rows != layer.in_ch) throw std::invalid_argument("conv1d_forward: channel mismatch");
  if (x.cols < layer.width) throw std::invalid_argument("conv1d_forward: input shorter than kernel");
  Matrix y(layer.out_ch, x.cols);
  for (int oc = 0; oc < layer.out_ch; ++oc) {
    for (int t = 0; t < x.cols; ++t) {
      y.at(oc, t) = apply_activation(layer.act, conv_entry(layer, x, oc, t));
    }
  }
  return y;
}

Matrix conv1d_forward(const Conv1d& layer, const Matrix& x, bool parallel) {
  if (!parallel) return conv1d_forward_serial(layer, x);
  if (x.rows != layer.in_ch) throw std::invalid_argument("conv1d_forward: channel mismatch");
  if (x.cols < layer.width) throw std::invalid_argument("conv1d_forward: input shorter than kernel");
  Matrix y(layer.out_ch, x.cols);
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < layer.out_ch; ++oc) {
    for (int t = 0; t < x.cols; ++t) {
      y.at(oc, t) = apply_activation(layer.act, conv_entry(layer, x, oc, t));
    }
  }
  return y;
}

Matrix conv1d_backward(const Conv1d& layer, const Matrix& x, const Matrix& y, const Matrix& dy,
                       Conv1dGrad& grad, bool parallel) {
  if (dy.rows != layer.out_ch || dy.cols != x.cols || y.rows != layer.out_ch) {
    throw std::invalid_argument("conv1d_backward: shape mismatch");
  }
  if (grad.w.size() != layer.w.size()) grad.w.assign(layer.w.size(), 0.0);
  if (grad.b.size() != layer.b.size()) grad.b.assign(layer.b.size(), 0.0);

  const int half = layer.width / 2;
  const int cols = x.cols;

  // Gradient w.r.t. pre-activation.
  Matrix dpre(layer.out_ch, cols);
  for (int oc = 0; oc < layer.out_ch; ++oc) {
    for (int t = 0; t < cols; ++t) {
      dpre.at(oc, t) = dy.at(oc, t) * activation_grad_from_output(layer.act, y.at(oc, t));
    }
  }

  // Parameter gradients: each (oc, ic, k) accumulates an independent sum.
#pragma omp parallel for collapse(2) schedule(static) if (parallel)
  for (int oc = 0; oc < layer.out_ch; ++oc) {
    for (int ic = 0; ic < layer.in_ch; ++ic) {
      const double* xrow = &x.v[static_cast<std::size_t>(ic) * cols];
      const double* drow = &dpre.v[static_cast<std::size_t>(oc) * cols];
      double* gw = &grad.w[(static_cast<std::size_t>(oc) * layer.in_ch + ic) * layer.width];
      for (int k = 0; k < layer.width; ++k) {
        double acc = 0.0;
        for (int t = 0; t < cols; ++t) {
          int src = t + k - half;
          if (src >= 0 && src < cols) acc += drow[t] * xrow[src];
        }
        gw[k] += acc;
      }
    }
  }
  for (int oc = 0; oc < layer.out_ch; ++oc) {
    double acc = 0.0;
    const double* drow = &dpre.v[static_cast<std::size_t>(oc) * cols];
    for (int t = 0; t < cols; ++t) acc += drow[t];
    grad.b[oc] += acc;
  }

  // Gradient w.r.t. input (correlation with the flipped kernel).
  Matrix dx(layer.in_ch, cols);
#pragma omp parallel for collapse(2) schedule(static) if (parallel)
  for (int ic = 0; ic < layer.in_ch; ++ic) {
    for (int s = 0; s < cols; ++s) {
      double acc = 0.0;
      for (int oc = 0; oc < layer.out_ch; ++oc) {
        const double* drow = &dpre.v[static_cast<std::size_t>(oc) * cols];
        const double* wk = &layer.w[(static_cast<std::size_t>(oc) * layer.in_ch + ic) * layer.width];
        for (int k = 0; k < layer.width; ++k) {
          int t = s - k + half;
          if (t >= 0 && t < cols) acc += drow[t] * wk[k];
        }
      }
      dx.at(ic, s) = acc;
    }
  }
  return dx;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg, std::uint64_t t) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: size mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i] + cfg.weight_decay * params[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout_mask: rate must be in [0,1)");
  std::vector<double> mask(n, 1.0);
  if (rate == 0.0) return mask;
  const double keep = 1.0 - rate;
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = (rng.uniform_open() < rate) ? 0.0 : 1.0 / keep;
  }
  return mask;
}

}  // namespace dpsa
