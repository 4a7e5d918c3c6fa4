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

#ifndef DPSA_BN_HPP
#define DPSA_BN_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpsa/nn.hpp"
#include "dpsa/pitch_autoencoder.hpp"  // TrainingConfig
#include "dpsa/rng.hpp"

namespace dpsa {

/// Acoustic model: conv extractor -> M-dim bottleneck -> per-frame noise
/// layer -> 2-layer classifier with softmax over frame classes.
/// Sequence data is stored channels x frames (A x K at the input).
struct AcousticModel {
  int in_dim = 20;    // acoustic feature width A
  int hidden = 24;
  int bn_dim = 16;    // bottleneck width M
  int num_classes = 8;
  double epsilon = 0.0;
  std::array<Conv1d, 3> extractor;  // A->H, H->H, H->H, width 5, ReLU
  Conv1d projection;                // H->M, width 1, linear
  Conv1d cls_hidden;                // M->H, width 1, tanh
  Conv1d cls_out;                   // H->classes, width 1, linear (pre-softmax)
  std::vector<double> loss_trace;
};

AcousticModel make_acoustic_model(int in_dim, int hidden, int bn_dim, int num_classes,
                                  double epsilon, Rng& rng);

/// K x M bottleneck features (returned transposed internally as M x K).
/// Length is preserved by same-padding convolutions.
Matrix extract_bn(const AcousticModel& model, const Matrix& acoustic_mxk);

/// Frame mechanism: norm1(norm1(b) + Lap(2/epsilon)), where norm1 divides by
/// the signed L1 norm (sum of absolute values). Output has unit L1 norm.
std::vector<double> frame_noise(std::span<const double> b, double epsilon, Rng& rng);

/// frame_noise applied independently to every frame (column) of B.
Matrix noise_layer(const Matrix& bn_mxk, double epsilon, Rng& rng);

/// K x num_classes log-softmax rows (returned classes x K).
Matrix classify_frames(const AcousticModel& model, const Matrix& noisy_bn_mxk);

/// Frame-level cross-entropy: -sum_k logprob[label_k, k].
double ce_loss(const Matrix& logprobs_cxk, std::span<const int> labels);

struct BnUtterance {
  Matrix acoustic;          // A x K
  std::vector<int> labels;  // length K
};

/// Adam training with fresh noise per utterance per step; gradients flow
/// through both norm1 maps exactly and through the additive noise unchanged.
AcousticModel train_bn(std::span<const BnUtterance> corpus, const TrainingConfig& config,
                       double epsilon, int in_dim, int hidden = 24, int bn_dim = 16,
                       int num_classes = 8);

struct AcousticModelGrad {
  std::array<Conv1dGrad, 3> extractor;
  Conv1dGrad projection, cls_hidden, cls_out;
};

/// CE loss and full parameter gradient for one utterance with a fixed noise
/// realization (M x K).
std::pair<double, AcousticModelGrad> bn_loss_gradient(const AcousticModel& model,
                                                      const Matrix& acoustic,
                                                      std::span<const int> labels,
                                                      const Matrix& noise);

/// Input-perturbation baseline: the noise layer applied to features from a
/// model trained without noise. Identical mechanism arithmetic to noise_layer.
Matrix naive_dp_bn(const Matrix& fixed_bn_mxk, double epsilon, Rng& rng);

// Checkpoint format `DPBN`: same weight conventions as `DPAE`.
void save_acoustic_model(const std::string& path, const AcousticModel& model);
AcousticModel load_acoustic_model(const std::string& path);

}  // namespace dpsa

#endif  // DPSA_BN_HPP
