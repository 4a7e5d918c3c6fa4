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

#ifndef DPSA_PITCH_HPP
#define DPSA_PITCH_HPP

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "dpsa/rng.hpp"

namespace dpsa {

/// Per-frame fundamental frequency in Hz on a 10 ms grid.
/// Zero marks unvoiced or silent frames.
struct PitchSequence {
  std::vector<double> values;
  static constexpr double kFramePeriodMs = 10.0;
};

/// Voiced values with the bookkeeping needed to restore the zeros exactly.
struct VoicedView {
  std::vector<double> voiced;             // all nonzero values, in order
  std::vector<std::size_t> zero_positions;  // sorted indices of removed frames
  std::size_t original_length() const { return voiced.size() + zero_positions.size(); }
};

struct PitchStats {
  double mean = 0.0;
  double std = 0.0;  // population convention
};

struct CorpusPitchSummary {
  double length_min = 0, length_max = 0, length_avg = 0, length_std = 0;
  double nonzero_min = 0, nonzero_max = 0, nonzero_avg = 0, nonzero_std = 0;
};

/// Autocorrelation pitch estimator on 10 ms frames. Frames whose energy is
/// below the floor or whose normalized periodicity peak is below the voicing
/// threshold emit 0.
PitchSequence estimate_pitch(std::span<const double> waveform, int sample_rate_hz,
                             double f0_min_hz = 60.0, double f0_max_hz = 400.0);

/// Strip the zero frames, remembering where they were. Throws on an all-zero
/// sequence: there is nothing to anonymize and the caller must pass the
/// utterance through unchanged.
VoicedView remove_zeros(const PitchSequence& p);

/// Zero-mean unit-variance (population std) normalization; the returned stats
/// invert the transform. Throws when the sequence is shorter than 2 or nearly
/// constant (std below 1e-6).
std::pair<std::vector<double>, PitchStats> normalize(std::span<const double> voiced);

/// Affine map to target statistics: out[i] = z[i]*target.std + target.mean.
std::vector<double> pitch_convert(std::span<const double> z, const PitchStats& target);

/// Inverse of remove_zeros with the voiced values replaced.
PitchSequence reinsert_zeros(const VoicedView& view, std::span<const double> replacement);

/// Input-perturbation baseline: clip each normalized value to [-4, 4], then
/// add per-entry Laplace noise of scale 8/epsilon. Utility comparison only.
std::vector<double> naive_dp_pitch(std::span<const double> z, double epsilon, Rng& rng);

CorpusPitchSummary corpus_pitch_stats(std::span<const PitchSequence> corpus);

}  // namespace dpsa

#endif  // DPSA_PITCH_HPP
