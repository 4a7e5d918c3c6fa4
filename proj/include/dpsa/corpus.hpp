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

#ifndef DPSA_CORPUS_HPP
#define DPSA_CORPUS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dpsa/eval.hpp"
#include "dpsa/nn.hpp"
#include "dpsa/pitch.hpp"
#include "dpsa/rng.hpp"

namespace dpsa {

/// Identity is planted in local pitch jitter and per-speaker channel offsets;
/// prosody lives in shared slow contour dynamics.
struct SyntheticSpeakerSpec {
  double base_pitch_hz = 120.0;        // in [60, 400]
  double jitter_amplitude = 0.0;       // Hz, speaker-specific local perturbation
  std::vector<double> feature_offset;  // per-speaker channel signature (width A)
  std::vector<int> phone_inventory;    // frame classes this speaker draws from
};

struct CorpusGenParams {
  int utterances_per_speaker = 50;
  int min_frames = 80;
  int max_frames = 120;
  int feature_dim = 20;  // A
  int num_phones = 8;
  double observation_noise = 0.3;
  double unvoiced_fraction = 0.15;
  double prosody_amplitude_hz = 30.0;  // shared slow contour
  std::uint64_t seed = 0;
};

struct SyntheticUtterance {
  std::string id;
  int speaker = 0;
  Split split = Split::Train;
  PitchSequence pitch;
  Matrix acoustic;          // K x A
  std::vector<int> labels;  // length K
};

struct SyntheticCorpus {
  std::vector<SyntheticUtterance> utterances;
  Matrix phone_prototypes;  // num_phones x A
  CorpusGenParams params;
};

/// Default speaker roster: base pitches spread over [90, 250] Hz, jitter
/// amplitudes geometrically spaced, feature offsets random of given norm.
std::vector<SyntheticSpeakerSpec> default_speakers(int n, int feature_dim, int num_phones,
                                                   double jitter_min_hz, double jitter_max_hz,
                                                   double offset_norm, Rng& rng);

/// Deterministic generator; splits assigned 80/10/10 per speaker.
SyntheticCorpus gen_corpus(const std::vector<SyntheticSpeakerSpec>& specs,
                           const CorpusGenParams& params);

struct ManifestEntry {
  std::string utt_id;
  std::string speaker_id;
  std::string split;
  std::string pitch_file;
  std::string feature_file;
  std::string label_file;
};

struct CorpusManifest {
  std::map<std::string, std::string> generator_params;
  std::vector<ManifestEntry> entries;
};

/// Writes per-utterance pitch/feature/label files plus `manifest.txt` with
/// the generator parameters recorded as comments.
CorpusManifest write_corpus(const std::string& dir, const SyntheticCorpus& corpus);

CorpusManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const CorpusManifest& manifest);

}  // namespace dpsa

#endif  // DPSA_CORPUS_HPP
