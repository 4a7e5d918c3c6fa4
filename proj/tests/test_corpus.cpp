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

#include <filesystem>
#include <map>
#include <vector>

#include "doctest.h"
#include "dpsa/io.hpp"

using namespace dpsa;

TEST_CASE("gen_corpus produces the requested layout") {
  Rng rng(1);
  auto specs = default_speakers(4, 10, 6, 0.5, 4.0, 1.0, rng);
  CorpusGenParams params;
  params.utterances_per_speaker = 10;
  params.feature_dim = 10;
  params.num_phones = 6;
  params.seed = 7;
  auto corpus = gen_corpus(specs, params);
  REQUIRE(corpus.utterances.size() == 40);

  std::map<int, int> per_speaker;
  std::map<int, std::map<Split, int>> split_counts;
  for (const auto& u : corpus.utterances) {
    ++per_speaker[u.speaker];
    ++split_counts[u.speaker][u.split];
    CHECK(u.pitch.values.size() == static_cast<std::size_t>(u.acoustic.rows));
    CHECK(u.acoustic.cols == 10);
    CHECK(u.labels.size() == u.pitch.values.size());
    CHECK(u.pitch.values.size() >= static_cast<std::size_t>(params.min_frames));
    CHECK(u.pitch.values.size() <= static_cast<std::size_t>(params.max_frames));
    for (int l : u.labels) {
      CHECK(l >= 0);
      CHECK(l < 6);
    }
  }
  for (auto& [spk, n] : per_speaker) CHECK(n == 10);
  for (auto& [spk, counts] : split_counts) {
    CHECK(counts[Split::Train] == 8);
    CHECK(counts[Split::Validation] == 1);
    CHECK(counts[Split::Test] == 1);
  }
}

TEST_CASE("gen_corpus is bitwise reproducible under a fixed seed") {
  Rng r1(2), r2(2);
  auto s1 = default_speakers(3, 8, 5, 0.5, 2.0, 1.0, r1);
  auto s2 = default_speakers(3, 8, 5, 0.5, 2.0, 1.0, r2);
  CorpusGenParams params;
  params.utterances_per_speaker = 5;
  params.feature_dim = 8;
  params.num_phones = 5;
  params.seed = 11;
  auto c1 = gen_corpus(s1, params);
  auto c2 = gen_corpus(s2, params);
  REQUIRE(c1.utterances.size() == c2.utterances.size());
  for (std::size_t i = 0; i < c1.utterances.size(); ++i) {
    CHECK(c1.utterances[i].pitch.values == c2.utterances[i].pitch.values);
    CHECK(c1.utterances[i].acoustic.v == c2.utterances[i].acoustic.v);
    CHECK(c1.utterances[i].labels == c2.utterances[i].labels);
  }
}

TEST_CASE("disjoint base pitches separate speakers by mean pitch") {
  Rng rng(3);
  auto specs = default_speakers(2, 6, 4, 0.1, 0.2, 0.5, rng);
  specs[0].base_pitch_hz = 90.0;
  specs[1].base_pitch_hz = 250.0;
  CorpusGenParams params;
  params.utterances_per_speaker = 20;
  params.feature_dim = 6;
  params.num_phones = 4;
  params.prosody_amplitude_hz = 10.0;
  params.seed = 4;
  auto corpus = gen_corpus(specs, params);
  // A threshold halfway between the base pitches classifies perfectly.
  for (const auto& u : corpus.utterances) {
    double mean = 0.0;
    int n = 0;
    for (double v : u.pitch.values) {
      if (v > 0.0) {
        mean += v;
        ++n;
      }
    }
    mean /= n;
    CHECK((mean > 170.0 ? 1 : 0) == u.speaker);
  }
}

TEST_CASE("identity-free generator parameters yield indistinguishable features") {
  Rng rng(5);
  auto specs = default_speakers(3, 8, 5, 0.0, 0.0, 0.0, rng);
  for (auto& s : specs) s.base_pitch_hz = 150.0;
  CorpusGenParams params;
  params.utterances_per_speaker = 4;
  params.feature_dim = 8;
  params.num_phones = 5;
  params.seed = 6;
  auto corpus = gen_corpus(specs, params);
  for (const auto& u : corpus.utterances) {
    // No speaker offset was planted.
    CHECK(specs[u.speaker].feature_offset ==
          std::vector<double>(8, 0.0));
  }
}

TEST_CASE("gen_corpus validates specs") {
  Rng rng(7);
  auto specs = default_speakers(2, 6, 4, 0.5, 1.0, 1.0, rng);
  CorpusGenParams params;
  params.feature_dim = 6;
  params.num_phones = 4;

  auto bad_pitch = specs;
  bad_pitch[0].base_pitch_hz = 30.0;
  CHECK_THROWS(gen_corpus(bad_pitch, params));

  auto bad_offset = specs;
  bad_offset[1].feature_offset.resize(3);
  CHECK_THROWS(gen_corpus(bad_offset, params));

  std::vector<SyntheticSpeakerSpec> one(specs.begin(), specs.begin() + 1);
  CHECK_THROWS(gen_corpus(one, params));

  auto bad_params = params;
  bad_params.min_frames = 100;
  bad_params.max_frames = 50;
  CHECK_THROWS(gen_corpus(specs, bad_params));
}

TEST_CASE("corpus writes files and the manifest round-trips") {
  Rng rng(8);
  auto specs = default_speakers(2, 6, 4, 0.5, 1.0, 1.0, rng);
  CorpusGenParams params;
  params.utterances_per_speaker = 3;
  params.feature_dim = 6;
  params.num_phones = 4;
  params.seed = 9;
  auto corpus = gen_corpus(specs, params);

  auto dir = (std::filesystem::temp_directory_path() / "dpsa_corpus_test").string();
  auto manifest = write_corpus(dir, corpus);
  CHECK(manifest.entries.size() == 6);
  auto back = read_manifest(dir + "/manifest.txt");
  REQUIRE(back.entries.size() == 6);
  CHECK(back.generator_params.at("seed") == "9");
  for (const auto& e : back.entries) {
    auto pitch = read_pitch_file(dir + "/" + e.pitch_file);
    auto feats = read_feature_file(dir + "/" + e.feature_file);
    auto labels = read_label_file(dir + "/" + e.label_file);
    CHECK(pitch.values.size() == static_cast<std::size_t>(feats.rows));
    CHECK(labels.size() == pitch.values.size());
  }
  std::filesystem::remove_all(dir);
}
