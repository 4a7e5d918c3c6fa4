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

#include "dpsa/pitch_autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dpsa/dp.hpp"
#include "dpsa/io.hpp"

namespace dpsa {

namespace {

// d(1 - Corr(z, y)) / dy. Throws when either member has (near-)zero variance.
std::vector<double> corr_loss_grad(std::span<const double> z, std::span<const double> y,
                                   double* loss_out) {
  const std::size_t n = z.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("correlation: need equal lengths >= 2");
  double mz = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mz += z[i];
    my += y[i];
  }
  mz /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double szz = 0.0, syy = 0.0, szy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    szz += (z[i] - mz) * (z[i] - mz);
    syy += (y[i] - my) * (y[i] - my);
    szy += (z[i] - mz) * (y[i] - my);
  }
  if (szz < 1e-12 || syy < 1e-12) throw std::invalid_argument("correlation: zero-variance member");
  const double denom = std::sqrt(szz * syy);
  const double corr = szy / denom;
  if (loss_out) *loss_out = 1.0 - corr;
  std::vector<double> grad(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dcorr = (z[i] - mz) / denom - corr * (y[i] - my) / syy;
    grad[i] = -dcorr;
  }
  return grad;
}

Matrix row_vector_matrix(std::span<const double> z) {
  Matrix x(1, static_cast<int>(z.size()));
  std::copy(z.begin(), z.end(), x.v.begin());
  return x;
}

void apply_mask(Matrix& m, const std::vector<double>& mask) {
  for (std::size_t i = 0; i < m.v.size(); ++i) m.v[i] *= mask[i];
}

struct ForwardCache {
  Matrix x0;
  Matrix a1, a1m, a2, a2m;  // encoder hidden activations (raw and masked)
  Matrix h;                 // latent
  Matrix hdp;               // latent + noise
  Matrix c;                 // clipped latent
  Matrix g1, g1m, g2, g2m;  // decoder hidden activations
  Matrix y;                 // 1 x K output
};

// Forward pass with a fixed noise realization; empty masks mean no dropout.
ForwardCache forward_through(const PitchAutoencoder& model, std::span<const double> z,
                             const Matrix& noise, const std::vector<std::vector<double>>* masks) {
  ForwardCache f;
  f.x0 = row_vector_matrix(z);
  f.a1 = conv1d_forward(model.encoder[0], f.x0);
  f.a1m = f.a1;
  if (masks) apply_mask(f.a1m, (*masks)[0]);
  f.a2 = conv1d_forward(model.encoder[1], f.a1m);
  f.a2m = f.a2;
  if (masks) apply_mask(f.a2m, (*masks)[1]);
  f.h = conv1d_forward(model.encoder[2], f.a2m);
  if (noise.rows != f.h.rows || noise.cols != f.h.cols) {
    throw std::invalid_argument("pitch autoencoder: noise shape mismatch");
  }
  f.hdp = f.h;
  for (std::size_t i = 0; i < f.hdp.v.size(); ++i) f.hdp.v[i] += noise.v[i];
  f.c = f.hdp;
  for (auto& v : f.c.v) v = std::clamp(v, 0.0, 1.0);
  f.g1 = conv1d_forward(model.decoder[0], f.c);
  f.g1m = f.g1;
  if (masks) apply_mask(f.g1m, (*masks)[2]);
  f.g2 = conv1d_forward(model.decoder[1], f.g1m);
  f.g2m = f.g2;
  if (masks) apply_mask(f.g2m, (*masks)[3]);
  f.y = conv1d_forward(model.decoder[2], f.g2m);
  return f;
}

std::pair<double, PitchAutoencoderGrad> backward_through(
    const PitchAutoencoder& model, std::span<const double> z, const ForwardCache& f,
    const std::vector<std::vector<double>>* masks) {
  double loss = 0.0;
  std::vector<double> dy_vec = corr_loss_grad(z, std::span<const double>(f.y.v), &loss);
  Matrix dy = row_vector_matrix(dy_vec);

  PitchAutoencoderGrad grad;
  Matrix dg2m = conv1d_backward(model.decoder[2], f.g2m, f.y, dy, grad.decoder[2]);
  if (masks) apply_mask(dg2m, (*masks)[3]);
  Matrix dg1m = conv1d_backward(model.decoder[1], f.g1m, f.g2, dg2m, grad.decoder[1]);
  if (masks) apply_mask(dg1m, (*masks)[2]);
  Matrix dc = conv1d_backward(model.decoder[0], f.c, f.g1, dg1m, grad.decoder[0]);

  // Clip subgradient: 1 on [0,1] inclusive, 0 outside. Noise layer is
  // additive, so the gradient passes through unchanged.
  Matrix dh = dc;
  for (std::size_t i = 0; i < dh.v.size(); ++i) {
    if (f.hdp.v[i] < 0.0 || f.hdp.v[i] > 1.0) dh.v[i] = 0.0;
  }

  Matrix da2m = conv1d_backward(model.encoder[2], f.a2m, f.h, dh, grad.encoder[2]);
  if (masks) apply_mask(da2m, (*masks)[1]);
  Matrix da1m = conv1d_backward(model.encoder[1], f.a1m, f.a2, da2m, grad.encoder[1]);
  if (masks) apply_mask(da1m, (*masks)[0]);
  conv1d_backward(model.encoder[0], f.x0, f.a1, da1m, grad.encoder[0]);
  return {loss, std::move(grad)};
}

}  // namespace

PitchAutoencoder make_pitch_autoencoder(int channels, int width, double epsilon, Rng& rng) {
  if (channels < 1) throw std::invalid_argument("make_pitch_autoencoder: channels must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("make_pitch_autoencoder: epsilon must be positive");
  PitchAutoencoder m;
  m.channels = channels;
  m.width = width;
  m.epsilon = epsilon;
  m.encoder[0] = make_conv1d(1, channels, width, Activation::Sigmoid, rng);
  m.encoder[1] = make_conv1d(channels, channels, width, Activation::Sigmoid, rng);
  m.encoder[2] = make_conv1d(channels, channels, width, Activation::Sigmoid, rng);
  m.decoder[0] = make_conv1d(channels, channels, width, Activation::Sigmoid, rng);
  m.decoder[1] = make_conv1d(channels, channels, width, Activation::Sigmoid, rng);
  m.decoder[2] = make_conv1d(channels, 1, width, Activation::Linear, rng);
  return m;
}

Matrix encode(const PitchAutoencoder& model, std::span<const double> z) {
  if (static_cast<int>(z.size()) < model.width) {
    throw std::invalid_argument("encode: input shorter than kernel width");
  }
  Matrix x = row_vector_matrix(z);
  Matrix a1 = conv1d_forward(model.encoder[0], x);
  Matrix a2 = conv1d_forward(model.encoder[1], a1);
  return conv1d_forward(model.encoder[2], a2);
}

Matrix perturb_latent(const Matrix& h, double epsilon, Rng& rng) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("perturb_latent: epsilon must be positive");
  const double b = sigmoid_encoder_sensitivity(h.rows, h.cols) / epsilon;
  Matrix out = h;
  for (auto& v : out.v) v += sample_laplace(b, rng);
  return out;
}

Matrix clip_latent(Matrix m) {
  for (auto& v : m.v) v = std::clamp(v, 0.0, 1.0);
  return m;
}

std::vector<double> decode(const PitchAutoencoder& model, const Matrix& clipped) {
  if (clipped.rows != model.channels) throw std::invalid_argument("decode: latent shape mismatch");
  Matrix g1 = conv1d_forward(model.decoder[0], clipped);
  Matrix g2 = conv1d_forward(model.decoder[1], g1);
  Matrix y = conv1d_forward(model.decoder[2], g2);
  return y.v;
}

double correlation_loss(
    std::span<const std::pair<std::vector<double>, std::vector<double>>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("correlation_loss: no pairs");
  double total = 0.0;
  for (const auto& [z, y] : pairs) {
    double loss = 0.0;
    corr_loss_grad(z, y, &loss);
    total += loss;
  }
  return total / static_cast<double>(pairs.size());
}

std::pair<double, PitchAutoencoderGrad> loss_gradient(const PitchAutoencoder& model,
                                                      std::span<const double> z,
                                                      const Matrix& noise) {
  ForwardCache f = forward_through(model, z, noise, nullptr);
  return backward_through(model, z, f, nullptr);
}

PitchAutoencoder train_pitch_autoencoder(std::span<const std::vector<double>> corpus,
                                         const TrainingConfig& config, double epsilon,
                                         int channels, int width) {
  if (corpus.empty()) throw std::invalid_argument("train_pitch_autoencoder: empty corpus");
  Rng init_rng(config.seed, 0);
  Rng noise_rng(config.seed, 1);
  Rng dropout_rng(config.seed, 2);
  PitchAutoencoder model = make_pitch_autoencoder(channels, width, epsilon, init_rng);

  AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay};
  std::array<AdamState, 6> wstate, bstate;
  std::uint64_t t = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t u = 0; u < corpus.size(); ++u) {
      const auto& z = corpus[u];
      const int k = static_cast<int>(z.size());
      const double b = sigmoid_encoder_sensitivity(channels, k) / epsilon;
      Matrix noise(channels, k);
      for (auto& v : noise.v) v = sample_laplace(b, noise_rng);

      std::vector<std::vector<double>> masks;
      std::vector<std::vector<double>>* mask_ptr = nullptr;
      if (config.dropout > 0.0) {
        std::size_t hidden = static_cast<std::size_t>(channels) * k;
        masks = {dropout_mask(hidden, config.dropout, dropout_rng),
                 dropout_mask(hidden, config.dropout, dropout_rng),
                 dropout_mask(hidden, config.dropout, dropout_rng),
                 dropout_mask(hidden, config.dropout, dropout_rng)};
        mask_ptr = &masks;
      }

      ForwardCache f = forward_through(model, z, noise, mask_ptr);
      auto [loss, grad] = backward_through(model, z, f, mask_ptr);
      epoch_loss += loss;

      ++t;
      Conv1d* layers[6] = {&model.encoder[0], &model.encoder[1], &model.encoder[2],
                           &model.decoder[0], &model.decoder[1], &model.decoder[2]};
      Conv1dGrad* grads[6] = {&grad.encoder[0], &grad.encoder[1], &grad.encoder[2],
                              &grad.decoder[0], &grad.decoder[1], &grad.decoder[2]};
      for (int l = 0; l < 6; ++l) {
        adam_step(layers[l]->w, grads[l]->w, wstate[l], adam, t);
        adam_step(layers[l]->b, grads[l]->b, bstate[l], adam, t);
      }
    }
    model.loss_trace.push_back(epoch_loss / static_cast<double>(corpus.size()));
  }
  return model;
}

std::vector<double> reconstruct_normalized(const PitchAutoencoder& model,
                                           std::span<const double> z, Rng& rng, bool with_noise) {
  Matrix h = encode(model, z);
  Matrix hdp = with_noise ? perturb_latent(h, model.epsilon, rng) : h;
  std::vector<double> y = decode(model, clip_latent(std::move(hdp)));
  auto [yn, stats] = normalize(y);
  (void)stats;
  return yn;
}

PitchSequence anonymize_pitch(const PitchAutoencoder& model, const PitchSequence& p,
                              const PitchStats& target, Rng& rng) {
  VoicedView view = remove_zeros(p);
  auto [z, stats] = normalize(view.voiced);
  (void)stats;
  std::vector<double> yn = reconstruct_normalized(model, z, rng);
  std::vector<double> converted = pitch_convert(yn, target);
  return reinsert_zeros(view, converted);
}

void save_pitch_autoencoder(const std::string& path, const PitchAutoencoder& model) {
  BinaryWriter w(path);
  w.magic("DPAE");
  w.u8(1);
  w.u32(static_cast<std::uint32_t>(model.channels));
  w.u32(static_cast<std::uint32_t>(model.width));
  w.f64(model.epsilon);
  const Conv1d* layers[6] = {&model.encoder[0], &model.encoder[1], &model.encoder[2],
                             &model.decoder[0], &model.decoder[1], &model.decoder[2]};
  for (const Conv1d* l : layers) {
    w.u32(static_cast<std::uint32_t>(l->in_ch));
    w.u32(static_cast<std::uint32_t>(l->out_ch));
    w.write_f32_block(l->w);
    w.write_f32_block(l->b);
  }
}

PitchAutoencoder load_pitch_autoencoder(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("DPAE");
  std::uint8_t version = r.u8("version");
  if (version != 1) throw std::runtime_error(path + ": unsupported DPAE version");
  PitchAutoencoder m;
  m.channels = static_cast<int>(r.u32("channel count"));
  m.width = static_cast<int>(r.u32("kernel width"));
  m.epsilon = r.f64("epsilon");
  Conv1d* layers[6] = {&m.encoder[0], &m.encoder[1], &m.encoder[2],
                       &m.decoder[0], &m.decoder[1], &m.decoder[2]};
  Activation acts[6] = {Activation::Sigmoid, Activation::Sigmoid, Activation::Sigmoid,
                        Activation::Sigmoid, Activation::Sigmoid, Activation::Linear};
  for (int i = 0; i < 6; ++i) {
    layers[i]->in_ch = static_cast<int>(r.u32("layer input channels"));
    layers[i]->out_ch = static_cast<int>(r.u32("layer output channels"));
    layers[i]->width = m.width;
    layers[i]->act = acts[i];
    r.read_f32_block(layers[i]->w,
                     static_cast<std::size_t>(layers[i]->in_ch) * layers[i]->out_ch * m.width,
                     "layer weights");
    r.read_f32_block(layers[i]->b, static_cast<std::size_t>(layers[i]->out_ch), "layer biases");
  }
  return m;
}

}  // namespace dpsa
