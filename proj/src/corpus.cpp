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

#include "dpsa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dpsa/io.hpp"

namespace dpsa {

namespace {

double gaussian(Rng& rng) {
  // Box-Muller on two open-interval uniforms.
  double u1 = rng.uniform_open();
  double u2 = rng.uniform_open();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

std::vector<SyntheticSpeakerSpec> default_speakers(int n, int feature_dim, int num_phones,
                                                   double jitter_min_hz, double jitter_max_hz,
                                                   double offset_norm, Rng& rng) {
  if (n < 2) throw std::invalid_argument("default_speakers: need at least 2 speakers");
  std::vector<SyntheticSpeakerSpec> specs(n);
  for (int i = 0; i < n; ++i) {
    auto& s = specs[i];
    s.base_pitch_hz = 90.0 + 160.0 * i / std::max(1, n - 1);
    double frac = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
    s.jitter_amplitude = jitter_min_hz * std::pow(jitter_max_hz / std::max(jitter_min_hz, 1e-9), frac);
    if (jitter_max_hz == 0.0) s.jitter_amplitude = 0.0;
    s.feature_offset.resize(feature_dim);
    double norm = 0.0;
    for (auto& v : s.feature_offset) {
      v = gaussian(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0 && offset_norm > 0.0) {
      for (auto& v : s.feature_offset) v *= offset_norm / norm;
    } else {
      std::fill(s.feature_offset.begin(), s.feature_offset.end(), 0.0);
    }
    s.phone_inventory.resize(num_phones);
    for (int p = 0; p < num_phones; ++p) s.phone_inventory[p] = p;
  }
  return specs;
}

SyntheticCorpus gen_corpus(const std::vector<SyntheticSpeakerSpec>& specs,
                           const CorpusGenParams& params) {
  if (specs.size() < 2) throw std::invalid_argument("gen_corpus: need at least 2 speakers");
  for (const auto& s : specs) {
    if (s.base_pitch_hz < 60.0 || s.base_pitch_hz > 400.0) {
      throw std::invalid_argument("gen_corpus: base pitch outside [60, 400] Hz");
    }
    if (s.jitter_amplitude < 0.0) throw std::invalid_argument("gen_corpus: negative jitter");
    if (static_cast<int>(s.feature_offset.size()) != params.feature_dim) {
      throw std::invalid_argument("gen_corpus: feature offset width mismatch");
    }
    if (s.phone_inventory.empty()) throw std::invalid_argument("gen_corpus: empty phone inventory");
  }
  if (params.utterances_per_speaker < 1 || params.min_frames < 10 ||
      params.max_frames < params.min_frames) {
    throw std::invalid_argument("gen_corpus: degenerate generation parameters");
  }

  SyntheticCorpus corpus;
  corpus.params = params;
  Rng proto_rng(params.seed, 100);
  corpus.phone_prototypes = Matrix(params.num_phones, params.feature_dim);
  for (auto& v : corpus.phone_prototypes.v) v = gaussian(proto_rng);

  const int per = params.utterances_per_speaker;
  const int n_train = std::max(1, (per * 8) / 10);
  const int n_val = std::max(per > 1 ? 1 : 0, per / 10);

  for (std::size_t spk = 0; spk < specs.size(); ++spk) {
    const auto& spec = specs[spk];
    Rng spk_rng(params.seed, 1000 + spk);
    for (int u = 0; u < per; ++u) {
      SyntheticUtterance utt;
      std::ostringstream id;
      id << "spk" << spk << "_utt" << u;
      utt.id = id.str();
      utt.speaker = static_cast<int>(spk);
      utt.split = (u < n_train) ? Split::Train : (u < n_train + n_val) ? Split::Validation : Split::Test;

      const int k = params.min_frames +
                    static_cast<int>(spk_rng.uniform_open() * (params.max_frames - params.min_frames + 1)) %
                        (params.max_frames - params.min_frames + 1);

      // Shared slow prosodic contour: two sinusoids with random phase.
      double phase1 = 2.0 * M_PI * spk_rng.uniform_open();
      double phase2 = 2.0 * M_PI * spk_rng.uniform_open();
      double period1 = 40.0 + 40.0 * spk_rng.uniform_open();
      double period2 = 15.0 + 15.0 * spk_rng.uniform_open();
      utt.pitch.values.resize(k);
      for (int t = 0; t < k; ++t) {
        double slow = params.prosody_amplitude_hz *
                      (0.7 * std::sin(2.0 * M_PI * t / period1 + phase1) +
                       0.3 * std::sin(2.0 * M_PI * t / period2 + phase2));
        double jitter = spec.jitter_amplitude * gaussian(spk_rng);
        utt.pitch.values[t] = std::max(40.0, spec.base_pitch_hz + slow + jitter);
      }
      // Unvoiced stretches as zero runs.
      int zero_budget = static_cast<int>(params.unvoiced_fraction * k);
      while (zero_budget > 0) {
        int run = 2 + static_cast<int>(spk_rng.uniform_open() * 5) % 5;
        run = std::min(run, zero_budget);
        int start = static_cast<int>(spk_rng.uniform_open() * (k - run));
        for (int t = start; t < start + run; ++t) utt.pitch.values[t] = 0.0;
        zero_budget -= run;
      }

      // Frame labels: phone runs of 5-15 frames from the speaker inventory.
      utt.labels.resize(k);
      int t = 0;
      while (t < k) {
        int phone = spec.phone_inventory[static_cast<std::size_t>(
            spk_rng.uniform_open() * spec.phone_inventory.size())];
        int run = 5 + static_cast<int>(spk_rng.uniform_open() * 11) % 11;
        for (int i = 0; i < run && t < k; ++i) utt.labels[t++] = phone;
      }

      // Acoustic features: prototype + speaker offset + observation noise.
      utt.acoustic = Matrix(k, params.feature_dim);
      for (int f = 0; f < k; ++f) {
        for (int c = 0; c < params.feature_dim; ++c) {
          utt.acoustic.at(f, c) = corpus.phone_prototypes.at(utt.labels[f], c) +
                                  spec.feature_offset[c] +
                                  params.observation_noise * gaussian(spk_rng);
        }
      }
      corpus.utterances.push_back(std::move(utt));
    }
  }
  return corpus;
}

CorpusManifest write_corpus(const std::string& dir, const SyntheticCorpus& corpus) {
  std::filesystem::create_directories(dir);
  CorpusManifest manifest;
  auto& p = corpus.params;
  manifest.generator_params = {
      {"seed", std::to_string(p.seed)},
      {"utterances_per_speaker", std::to_string(p.utterances_per_speaker)},
      {"min_frames", std::to_string(p.min_frames)},
      {"max_frames", std::to_string(p.max_frames)},
      {"feature_dim", std::to_string(p.feature_dim)},
      {"num_phones", std::to_string(p.num_phones)},
      {"observation_noise", std::to_string(p.observation_noise)},
      {"unvoiced_fraction", std::to_string(p.unvoiced_fraction)},
      {"prosody_amplitude_hz", std::to_string(p.prosody_amplitude_hz)},
  };
  for (const auto& utt : corpus.utterances) {
    ManifestEntry e;
    e.utt_id = utt.id;
    e.speaker_id = "spk" + std::to_string(utt.speaker);
    e.split = utt.split == Split::Train ? "train" : utt.split == Split::Validation ? "validation" : "test";
    e.pitch_file = utt.id + ".dpf0";
    e.feature_file = utt.id + ".dpaf";
    e.label_file = utt.id + ".dplab";
    write_pitch_file(dir + "/" + e.pitch_file, utt.pitch);
    write_feature_file(dir + "/" + e.feature_file, utt.acoustic);
    write_label_file(dir + "/" + e.label_file, utt.labels);
    manifest.entries.push_back(std::move(e));
  }
  write_manifest(dir + "/manifest.txt", manifest);
  return manifest;
}

void write_manifest(const std::string& path, const CorpusManifest& manifest) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "dpmanifest v1\n";
  for (const auto& [k, v] : manifest.generator_params) f << "#param " << k << "=" << v << "\n";
  for (const auto& e : manifest.entries) {
    f << e.utt_id << "," << e.speaker_id << "," << e.split << "," << e.pitch_file << ","
      << e.feature_file << "," << e.label_file << "\n";
  }
}

CorpusManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "dpmanifest v1") {
    throw std::runtime_error(path + ": bad manifest header");
  }
  CorpusManifest manifest;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line.rfind("#param ", 0) == 0) {
      auto eq = line.find('=');
      if (eq == std::string::npos) throw std::runtime_error(path + ": malformed param line");
      manifest.generator_params[line.substr(7, eq - 7)] = line.substr(eq + 1);
      continue;
    }
    if (line[0] == '#') continue;
    std::istringstream ls(line);
    ManifestEntry e;
    if (!std::getline(ls, e.utt_id, ',') || !std::getline(ls, e.speaker_id, ',') ||
        !std::getline(ls, e.split, ',') || !std::getline(ls, e.pitch_file, ',') ||
        !std::getline(ls, e.feature_file, ',') || !std::getline(ls, e.label_file)) {
      throw std::runtime_error(path + ": malformed manifest entry '" + line + "'");
    }
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

}  // namespace dpsa
