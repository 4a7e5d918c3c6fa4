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

#ifndef DPSA_PITCH_AUTOENCODER_HPP
#define DPSA_PITCH_AUTOENCODER_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpsa/nn.hpp"
#include "dpsa/pitch.hpp"
#include "dpsa/rng.hpp"

namespace dpsa {

struct TrainingConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  double dropout = 1e-3;
  int batch_size = 1;  // variable-length sequences, one utterance per step
  int epochs = 20;
  std::uint64_t seed = 0;
};

/// Convolutional autoencoder over normalized voiced pitch:
/// encoder 1->C->C->C (sigmoid) | + Laplace noise | clip to [0,1] |
/// decoder C->C->C (sigmoid) -> 1 (linear).
struct PitchAutoencoder {
  int channels = 8;
  int width = 5;
  double epsilon = 0.0;
  std::array<Conv1d, 3> encoder;
  std::array<Conv1d, 3> decoder;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

PitchAutoencoder make_pitch_autoencoder(int channels, int width, double epsilon, Rng& rng);

/// C x K latent with every entry in (0,1).
Matrix encode(const PitchAutoencoder& model, std::span<const double> z);

/// Latent plus iid Laplace noise of scale C*K/epsilon per entry.
Matrix perturb_latent(const Matrix& h, double epsilon, Rng& rng);

/// Elementwise clamp to [0,1].
Matrix clip_latent(Matrix m);

/// Decode a clipped C x K latent back to a length-K sequence.
std::vector<double> decode(const PitchAutoencoder& model, const Matrix& clipped);

/// Mean over pairs of (1 - Pearson correlation); per-pair value in [0,2].
double correlation_loss(
    std::span<const std::pair<std::vector<double>, std::vector<double>>> pairs);

struct PitchAutoencoderGrad {
  std::array<Conv1dGrad, 3> encoder;
  std::array<Conv1dGrad, 3> decoder;
};

/// Loss and full parameter gradient for one utterance with a fixed noise
/// realization. The noise layer passes the gradient unchanged; the clip
/// contributes subgradient 1 on [0,1] (inclusive) and 0 outside.
std::pair<double, PitchAutoencoderGrad> loss_gradient(const PitchAutoencoder& model,
                                                      std::span<const double> z,
                                                      const Matrix& noise);

/// Adam training on normalized voiced pitch sequences, batch size 1, fresh
/// noise per utterance per step. Dropout on hidden activations only.
PitchAutoencoder train_pitch_autoencoder(std::span<const std::vector<double>> corpus,
                                         const TrainingConfig& config, double epsilon,
                                         int channels = 8, int width = 5);

/// Deployment path: remove zeros, normalize, encode, perturb, clip, decode,
/// re-normalize, convert to target stats, reinsert zeros.
PitchSequence anonymize_pitch(const PitchAutoencoder& model, const PitchSequence& p,
                              const PitchStats& target, Rng& rng);

/// Reconstruction in the normalized domain (re-normalized decoder output);
/// used for utility measurement and attack featurization.
std::vector<double> reconstruct_normalized(const PitchAutoencoder& model,
                                           std::span<const double> z, Rng& rng,
                                           bool with_noise = true);

// Checkpoint format `DPAE`: magic, version byte, C, width, epsilon, layer
// shapes and float32 weights in declaration order.
void save_pitch_autoencoder(const std::string& path, const PitchAutoencoder& model);
PitchAutoencoder load_pitch_autoencoder(const std::string& path);

}  // namespace dpsa

#endif  // DPSA_PITCH_AUTOENCODER_HPP
