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

#ifndef DPSA_ANONYMIZER_HPP
#define DPSA_ANONYMIZER_HPP

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dpsa/bn.hpp"
#include "dpsa/dp.hpp"
#include "dpsa/nn.hpp"
#include "dpsa/pitch.hpp"
#include "dpsa/pitch_autoencoder.hpp"
#include "dpsa/rng.hpp"

namespace dpsa {

struct ClusterAssignment {
  std::vector<int> cluster_of;   // per-vector cluster id, contiguous from 0
  std::vector<int> exemplars;    // pool row index per cluster
  int num_clusters() const { return static_cast<int>(exemplars.size()); }
};

struct ApConfig {
  double damping = 0.9;
  int max_iterations = 1000;
  int stable_iterations = 50;  // exemplar set unchanged this long => converged
};

/// Affinity Propagation over cosine similarities with median-similarity
/// preference. Throws on non-convergence; no partial assignment is returned.
ClusterAssignment cluster_pool(const Matrix& pool, const ApConfig& config = {});

enum class AssignmentMode { Utterance, Speaker };

struct TargetSelection {
  int cluster_id = 0;
  std::vector<int> member_indices;  // selected pool rows
  std::vector<double> vector;       // arithmetic mean of the selected rows
  AssignmentMode mode = AssignmentMode::Utterance;
};

/// Pseudo-speaker target selection: uniformly pick one of the min(10, #)
/// largest clusters, then ceil(n/2) members without replacement, and average.
/// Speaker-level selections are cached per speaker id and reused. Never reads
/// the input utterance.
class TargetSelector {
 public:
  TargetSelector(const Matrix& pool, const ClusterAssignment& clusters)
      : pool_(pool), clusters_(clusters) {}

  TargetSelection select(AssignmentMode mode, Rng& rng,
                         const std::optional<std::string>& speaker_id = std::nullopt);

 private:
  TargetSelection draw(Rng& rng) const;

  const Matrix& pool_;
  const ClusterAssignment& clusters_;
  std::mutex mutex_;
  std::map<std::string, TargetSelection> speaker_cache_;
};

struct AnonymizedBundle {
  PitchSequence pitch;
  Matrix bn;  // frames x M, every row unit L1 norm
  std::vector<double> target_vector;
  PrivacyLedger ledger;
  PrivacyBudget simple_total;    // epsilon_1 + K * epsilon_2, delta 0
  PrivacyBudget advanced_total;  // advanced composition of the K-fold BN term
};

/// Full pipeline minus waveform synthesis: DP pitch, DP BN features, target
/// vector, and the utterance's privacy ledger.
AnonymizedBundle anonymize_utterance(const PitchAutoencoder& pitch_model,
                                     const AcousticModel& bn_model, const PitchSequence& p,
                                     const Matrix& acoustic_kxa, TargetSelector& selector,
                                     double epsilon_pitch, double epsilon_bn,
                                     const PitchStats& target_pitch_stats, double delta,
                                     AssignmentMode mode, Rng& rng,
                                     const std::optional<std::string>& speaker_id = std::nullopt);

/// Bundle directory layout: pitch.dpf0, bn.dpaf, target.dpxv, ledger.txt.
void save_bundle(const std::string& dir, const AnonymizedBundle& bundle);

}  // namespace dpsa

#endif  // DPSA_ANONYMIZER_HPP
