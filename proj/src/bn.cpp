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

#include "dpsa/bn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dpsa/dp.hpp"
#include "dpsa/io.hpp"

namespace dpsa {

namespace {

constexpr double kNormFloor = 1e-12;

double l1_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::fabs(x);
  return s;
}

// y = c / ||c||_1 applied in place over a column of an M x K matrix.
// Returns the norm used.
double norm1_column(Matrix& m, int col) {
  double s = 0.0;
  for (int r = 0; r < m.rows; ++r) s += std::fabs(m.at(r, col));
  if (s <= kNormFloor) throw std::invalid_argument("frame_noise: degenerate L1 norm");
  for (int r = 0; r < m.rows; ++r) m.at(r, col) /= s;
  return s;
}

// Backward of y = c/s with s = sum |c_i|:
// dc_j = (dy_j - (sum_i dy_i * y_i) * sign(c_j)) / s.
void norm1_backward_column(const Matrix& c, const Matrix& y, Matrix& dy, double s, int col) {
  double dot = 0.0;
  for (int r = 0; r < c.rows; ++r) dot += dy.at(r, col) * y.at(r, col);
  for (int r = 0; r < c.rows; ++r) {
    double sgn = c.at(r, col) >= 0.0 ? 1.0 : -1.0;
    dy.at(r, col) = (dy.at(r, col) - dot * sgn) / s;
  }
}

struct NoiseLayerCache {
  Matrix u;   // norm1(b)
  Matrix y0;  // u + noise
  Matrix y;   // norm1(y0)
  std::vector<double> s1, s2;
};

NoiseLayerCache noise_layer_cached(const Matrix& bn, const Matrix& noise) {
  NoiseLayerCache cache;
  cache.u = bn;
  cache.s1.resize(bn.cols);
  for (int t = 0; t < bn.cols; ++t) cache.s1[t] = norm1_column(cache.u, t);
  cache.y0 = cache.u;
  for (std::size_t i = 0; i < cache.y0.v.size(); ++i) cache.y0.v[i] += noise.v[i];
  cache.y = cache.y0;
  cache.s2.resize(bn.cols);
  for (int t = 0; t < bn.cols; ++t) cache.s2[t] = norm1_column(cache.y, t);
  return cache;
}

}  // namespace

AcousticModel make_acoustic_model(int in_dim, int hidden, int bn_dim, int num_classes,
                                  double epsilon, Rng& rng) {
  if (in_dim < 1 || hidden < 1 || bn_dim < 1 || num_classes < 2) {
    throw std::invalid_argument("make_acoustic_model: bad dimensions");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("make_acoustic_model: epsilon must be positive");
  AcousticModel m;
  m.in_dim = in_dim;
  m.hidden = hidden;
  m.bn_dim = bn_dim;
  m.num_classes = num_classes;
  m.epsilon = epsilon;
  m.extractor[0] = make_conv1d(in_dim, hidden, 5, Activation::Relu, rng);
  m.extractor[1] = make_conv1d(hidden, hidden, 5, Activation::Relu, rng);
  m.extractor[2] = make_conv1d(hidden, hidden, 5, Activation::Relu, rng);
  m.projection = make_conv1d(hidden, bn_dim, 1, Activation::Linear, rng);
  m.cls_hidden = make_conv1d(bn_dim, hidden, 1, Activation::Tanh, rng);
  m.cls_out = make_conv1d(hidden, num_classes, 1, Activation::Linear, rng);
  return m;
}

Matrix extract_bn(const AcousticModel& model, const Matrix& acoustic_mxk) {
  if (acoustic_mxk.rows != model.in_dim) {
    throw std::invalid_argument("extract_bn: acoustic feature width mismatch");
  }
  Matrix h = conv1d_forward(model.extractor[0], acoustic_mxk);
  h = conv1d_forward(model.extractor[1], h);
  h = conv1d_forward(model.extractor[2], h);
  return conv1d_forward(model.projection, h);
}

std::vector<double> frame_noise(std::span<const double> b, double epsilon, Rng& rng) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("frame_noise: epsilon must be positive");
  double s1 = l1_norm(b);
  if (s1 <= kNormFloor) throw std::invalid_argument("frame_noise: degenerate L1 norm");
  const double scale = 2.0 / epsilon;
  std::vector<double> y(b.size());
  // One resample on a (measure-zero) degenerate post-noise sum, then give up.
  for (int attempt = 0; attempt < 2; ++attempt) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      y[i] = b[i] / s1 + sample_laplace(scale, rng);
    }
    double s2 = l1_norm(y);
    if (s2 > kNormFloor) {
      for (auto& v : y) v /= s2;
      return y;
    }
  }
  throw std::runtime_error("frame_noise: degenerate post-noise norm after resampling");
}

Matrix noise_layer(const Matrix& bn_mxk, double epsilon, Rng& rng) {
  Matrix out(bn_mxk.rows, bn_mxk.cols);
  std::vector<double> col(bn_mxk.rows);
  for (int t = 0; t < bn_mxk.cols; ++t) {
    for (int r = 0; r < bn_mxk.rows; ++r) col[r] = bn_mxk.at(r, t);
    std::vector<double> noisy = frame_noise(col, epsilon, rng);
    for (int r = 0; r < bn_mxk.rows; ++r) out.at(r, t) = noisy[r];
  }
  return out;
}

Matrix naive_dp_bn(const Matrix& fixed_bn_mxk, double epsilon, Rng& rng) {
  return noise_layer(fixed_bn_mxk, epsilon, rng);
}

Matrix classify_frames(const AcousticModel& model, const Matrix& noisy_bn_mxk) {
  if (noisy_bn_mxk.rows != model.bn_dim) {
    throw std::invalid_argument("classify_frames: bottleneck width mismatch");
  }
  Matrix h = conv1d_forward(model.cls_hidden, noisy_bn_mxk);
  Matrix logits = conv1d_forward(model.cls_out, h);
  // log-softmax per frame
  for (int t = 0; t < logits.cols; ++t) {
    double mx = logits.at(0, t);
    for (int c = 1; c < logits.rows; ++c) mx = std::max(mx, logits.at(c, t));
    double lse = 0.0;
    for (int c = 0; c < logits.rows; ++c) lse += std::exp(logits.at(c, t) - mx);
    lse = mx + std::log(lse);
    for (int c = 0; c < logits.rows; ++c) logits.at(c, t) -= lse;
  }
  return logits;
}

double ce_loss(const Matrix& logprobs_cxk, std::span<const int> labels) {
  if (static_cast<int>(labels.size()) != logprobs_cxk.cols) {
    throw std::invalid_argument("ce_loss: label/frame count mismatch");
  }
  double loss = 0.0;
  for (int t = 0; t < logprobs_cxk.cols; ++t) {
    int l = labels[t];
    if (l < 0 || l >= logprobs_cxk.rows) throw std::invalid_argument("ce_loss: label out of range");
    loss -= logprobs_cxk.at(l, t);
  }
  return loss;
}

std::pair<double, AcousticModelGrad> bn_loss_gradient(const AcousticModel& model,
                                                      const Matrix& acoustic,
                                                      std::span<const int> labels,
                                                      const Matrix& noise) {
  // Forward with caches.
  Matrix h1 = conv1d_forward(model.extractor[0], acoustic);
  Matrix h2 = conv1d_forward(model.extractor[1], h1);
  Matrix h3 = conv1d_forward(model.extractor[2], h2);
  Matrix bn = conv1d_forward(model.projection, h3);
  if (noise.rows != bn.rows || noise.cols != bn.cols) {
    throw std::invalid_argument("bn_loss_gradient: noise shape mismatch");
  }
  NoiseLayerCache nl = noise_layer_cached(bn, noise);
  Matrix ch = conv1d_forward(model.cls_hidden, nl.y);
  Matrix logits = conv1d_forward(model.cls_out, ch);

  // Log-softmax and CE.
  const int classes = logits.rows, k = logits.cols;
  if (static_cast<int>(labels.size()) != k) {
    throw std::invalid_argument("bn_loss_gradient: label/frame count mismatch");
  }
  Matrix probs(classes, k);
  double loss = 0.0;
  for (int t = 0; t < k; ++t) {
    double mx = logits.at(0, t);
    for (int c = 1; c < classes; ++c) mx = std::max(mx, logits.at(c, t));
    double lse = 0.0;
    for (int c = 0; c < classes; ++c) lse += std::exp(logits.at(c, t) - mx);
    double log_lse = mx + std::log(lse);
    int l = labels[t];
    if (l < 0 || l >= classes) throw std::invalid_argument("bn_loss_gradient: label out of range");
    loss -= logits.at(l, t) - log_lse;
    for (int c = 0; c < classes; ++c) {
      probs.at(c, t) = std::exp(logits.at(c, t) - log_lse);
    }
  }

  // dCE/dlogits = softmax - onehot.
  Matrix dlogits = probs;
  for (int t = 0; t < k; ++t) dlogits.at(labels[t], t) -= 1.0;

  AcousticModelGrad grad;
  Matrix dch = conv1d_backward(model.cls_out, ch, logits, dlogits, grad.cls_out);
  Matrix dy = conv1d_backward(model.cls_hidden, nl.y, ch, dch, grad.cls_hidden);

  // Through the second norm1, the additive noise (identity), and the first.
  for (int t = 0; t < k; ++t) norm1_backward_column(nl.y0, nl.y, dy, nl.s2[t], t);
  for (int t = 0; t < k; ++t) norm1_backward_column(bn, nl.u, dy, nl.s1[t], t);

  Matrix dh3 = conv1d_backward(model.projection, h3, bn, dy, grad.projection);
  Matrix dh2 = conv1d_backward(model.extractor[2], h2, h3, dh3, grad.extractor[2]);
  Matrix dh1 = conv1d_backward(model.extractor[1], h1, h2, dh2, grad.extractor[1]);
  conv1d_backward(model.extractor[0], acoustic, h1, dh1, grad.extractor[0]);
  return {loss, std::move(grad)};
}

AcousticModel train_bn(std::span<const BnUtterance> corpus, const TrainingConfig& config,
                       double epsilon, int in_dim, int hidden, int bn_dim, int num_classes) {
  if (corpus.empty()) throw std::invalid_argument("train_bn: empty corpus");
  for (const auto& u : corpus) {
    if (u.acoustic.rows != in_dim) throw std::invalid_argument("train_bn: inconsistent feature width");
    if (static_cast<int>(u.labels.size()) != u.acoustic.cols) {
      throw std::invalid_argument("train_bn: label/frame count mismatch");
    }
  }
  Rng init_rng(config.seed, 10);
  Rng noise_rng(config.seed, 11);
  AcousticModel model = make_acoustic_model(in_dim, hidden, bn_dim, num_classes, epsilon, init_rng);

  AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay};
  std::array<AdamState, 6> wstate, bstate;
  std::uint64_t t = 0;

  const double scale = 2.0 / epsilon;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::size_t frames = 0;
    for (const auto& utt : corpus) {
      Matrix noise(bn_dim, utt.acoustic.cols);
      for (auto& v : noise.v) v = sample_laplace(scale, noise_rng);
      auto [loss, grad] = bn_loss_gradient(model, utt.acoustic, utt.labels, noise);
      epoch_loss += loss;
      frames += static_cast<std::size_t>(utt.acoustic.cols);

      // Per-frame mean gradient keeps the step size independent of K.
      const double inv_k = 1.0 / static_cast<double>(utt.acoustic.cols);
      Conv1d* layers[6] = {&model.extractor[0], &model.extractor[1], &model.extractor[2],
                           &model.projection, &model.cls_hidden, &model.cls_out};
      Conv1dGrad* grads[6] = {&grad.extractor[0], &grad.extractor[1], &grad.extractor[2],
                              &grad.projection, &grad.cls_hidden, &grad.cls_out};
      ++t;
      for (int l = 0; l < 6; ++l) {
        for (auto& g : grads[l]->w) g *= inv_k;
        for (auto& g : grads[l]->b) g *= inv_k;
        adam_step(layers[l]->w, grads[l]->w, wstate[l], adam, t);
        adam_step(layers[l]->b, grads[l]->b, bstate[l], adam, t);
      }
    }
    model.loss_trace.push_back(epoch_loss / static_cast<double>(frames));
  }
  return model;
}

void save_acoustic_model(const std::string& path, const AcousticModel& model) {
  BinaryWriter w(path);
  w.magic("DPBN");
  w.u8(1);
  w.u32(static_cast<std::uint32_t>(model.in_dim));
  w.u32(static_cast<std::uint32_t>(model.hidden));
  w.u32(static_cast<std::uint32_t>(model.bn_dim));
  w.u32(static_cast<std::uint32_t>(model.num_classes));
  w.f64(model.epsilon);
  const Conv1d* layers[6] = {&model.extractor[0], &model.extractor[1], &model.extractor[2],
                             &model.projection, &model.cls_hidden, &model.cls_out};
  for (const Conv1d* l : layers) {
    w.u32(static_cast<std::uint32_t>(l->in_ch));
    w.u32(static_cast<std::uint32_t>(l->out_ch));
    w.u32(static_cast<std::uint32_t>(l->width));
    w.write_f32_block(l->w);
    w.write_f32_block(l->b);
  }
}

AcousticModel load_acoustic_model(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("DPBN");
  std::uint8_t version = r.u8("version");
  if (version != 1) throw std::runtime_error(path + ": unsupported DPBN version");
  AcousticModel m;
  m.in_dim = static_cast<int>(r.u32("input width"));
  m.hidden = static_cast<int>(r.u32("hidden width"));
  m.bn_dim = static_cast<int>(r.u32("bottleneck width"));
  m.num_classes = static_cast<int>(r.u32("class count"));
  m.epsilon = r.f64("epsilon");
  Conv1d* layers[6] = {&m.extractor[0], &m.extractor[1], &m.extractor[2],
                       &m.projection, &m.cls_hidden, &m.cls_out};
  Activation acts[6] = {Activation::Relu, Activation::Relu, Activation::Relu,
                        Activation::Linear, Activation::Tanh, Activation::Linear};
  for (int i = 0; i < 6; ++i) {
    layers[i]->in_ch = static_cast<int>(r.u32("layer input channels"));
    layers[i]->out_ch = static_cast<int>(r.u32("layer output channels"));
    layers[i]->width = static_cast<int>(r.u32("layer kernel width"));
    layers[i]->act = acts[i];
    r.read_f32_block(
        layers[i]->w,
        static_cast<std::size_t>(layers[i]->in_ch) * layers[i]->out_ch * layers[i]->width,
        "layer weights");
    r.read_f32_block(layers[i]->b, static_cast<std::size_t>(layers[i]->out_ch), "layer biases");
  }
  return m;
}

}  // namespace dpsa
