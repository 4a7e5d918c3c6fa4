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

#ifndef DPSA_EVAL_HPP
#define DPSA_EVAL_HPP

#include <map>
#include <span>
#include <string>
#include <vector>

#include "dpsa/nn.hpp"
#include "dpsa/rng.hpp"

namespace dpsa {

struct ScoreSet {
  std::vector<double> mated;
  std::vector<double> nonmated;
};

enum class Split { Train, Validation, Test };

struct LabeledUtterance {
  Matrix features;  // frames x feature width
  int speaker = 0;
  Split split = Split::Train;
};

/// Pooled-statistics speaker classifier: per-column mean and population std
/// over frames -> hidden affine + tanh -> softmax over speakers.
struct AttackModel {
  int feature_dim = 0;  // input width = 2 * feature_dim
  int hidden = 32;
  int num_speakers = 0;
  Conv1d layer1;  // 2F -> hidden, tanh (width-1 conv as a dense layer)
  Conv1d layer2;  // hidden -> speakers, linear
};

struct AttackConfig {
  double learning_rate = 1e-2;
  int max_epochs = 200;
  int patience = 20;  // early stopping on validation accuracy
  int hidden = 32;
  std::uint64_t seed = 0;
};

double pearson_corr(std::span<const double> x, std::span<const double> y);

/// Equal error rate in [0, 0.5]: sweep all distinct-score midpoints,
/// FAR(t) = fraction of nonmated >= t, FRR(t) = fraction of mated < t; the
/// operating point minimizes |FAR - FRR| with ties broken by (FAR+FRR)/2.
double eer(const ScoreSet& scores);

/// 1 minus the global linkability estimated from shared-range histograms of
/// the two score distributions with equal priors.
double unlinkability(const ScoreSet& scores, int bins = 50);

AttackModel train_asi_attack(std::span<const LabeledUtterance> corpus, const AttackConfig& config);

/// 100 * (1 - top-1 accuracy) on the given split.
double asi_error(const AttackModel& model, std::span<const LabeledUtterance> corpus,
                 Split split = Split::Test);

double asi_accuracy(const AttackModel& model, std::span<const LabeledUtterance> corpus, Split split);

/// Mean+std pooled embedding of a frames x F feature matrix (length 2F).
std::vector<double> pooled_embedding(const Matrix& features);

struct Trial {
  Matrix features;
  int claimed_speaker = 0;
  int true_speaker = 0;
};

/// Cosine similarity of each trial's pooled embedding to the claimed
/// speaker's mean enrolled embedding; mated when the claim is correct.
ScoreSet linkage_scores(const std::map<int, std::vector<Matrix>>& enroll,
                        std::span<const Trial> trials);

/// 100 * edit distance / |reference| with unit costs.
double wer(std::span<const std::string> reference, std::span<const std::string> hypothesis);

/// Unit-cost Levenshtein distance between word sequences.
std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b);

// Score CSV: header `label,score`, label in {mated, nonmated}.
void write_scores(const std::string& path, const ScoreSet& scores);
ScoreSet read_scores(const std::string& path);

}  // namespace dpsa

#endif  // DPSA_EVAL_HPP
