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

#include "dpsa/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dpsa/rng.hpp"

using namespace dpsa;

namespace {

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("feature matrix file round trip is bitwise at f32 precision") {
  Rng rng(1);
  Matrix m(17, 9);
  for (auto& v : m.v) v = static_cast<float>(2.0 * rng.uniform_open() - 1.0);
  auto path = tmp("dpsa_test.dpaf");
  write_feature_file(path, m);
  auto back = read_feature_file(path);
  CHECK(back.rows == 17);
  CHECK(back.cols == 9);
  CHECK(back.v == m.v);  // values were exactly representable as f32

  // Round trip of the round trip is bitwise identical on disk too.
  auto path2 = tmp("dpsa_test2.dpaf");
  write_feature_file(path2, back);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string a((std::istreambuf_iterator<char>(f1)), {});
  std::string b((std::istreambuf_iterator<char>(f2)), {});
  CHECK(a == b);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("truncated feature file errors name the shortfall") {
  Rng rng(2);
  Matrix m(4, 4);
  for (auto& v : m.v) v = rng.uniform_open();
  auto path = tmp("dpsa_trunc.dpaf");
  write_feature_file(path, m);
  // Chop the last 8 bytes off.
  auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 8);
  CHECK_THROWS_WITH_AS(read_feature_file(path), doctest::Contains("bytes"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("bad magic and bad version are rejected") {
  auto path = tmp("dpsa_badmagic.dpaf");
  {
    std::ofstream f(path, std::ios::binary);
    f << "XXXX";
    f.put(1);
  }
  CHECK_THROWS(read_feature_file(path));
  std::remove(path.c_str());
}

TEST_CASE("vector pool round trip") {
  Rng rng(3);
  Matrix pool(25, 8);
  for (auto& v : pool.v) v = static_cast<float>(rng.uniform_open());
  auto path = tmp("dpsa_pool.dpxv");
  write_vector_pool(path, pool);
  auto back = read_vector_pool(path);
  CHECK(back.rows == 25);
  CHECK(back.cols == 8);
  CHECK(back.v == pool.v);
  std::remove(path.c_str());
}

TEST_CASE("pitch file round trip with zeros") {
  PitchSequence p;
  p.values = {0.0, 120.5, 0.0, 131.25, 98.0};
  auto path = tmp("dpsa_pitch.dpf0");
  write_pitch_file(path, p);
  auto back = read_pitch_file(path);
  CHECK(back.values == p.values);

  {
    std::ofstream f(path);
    f << "wrong header\n120\n";
  }
  CHECK_THROWS(read_pitch_file(path));
  std::remove(path.c_str());
}

TEST_CASE("label file round trip") {
  std::vector<int> labels{0, 3, 2, 2, 7, 1};
  auto path = tmp("dpsa_labels.dplab");
  write_label_file(path, labels);
  CHECK(read_label_file(path) == labels);
  std::remove(path.c_str());
}

TEST_CASE("wav round trip and mono enforcement") {
  WaveformRecord w;
  w.sample_rate = 16000;
  w.samples = {0, 1000, -1000, 32767, -32768, 12345};
  auto path = tmp("dpsa_test.wav");
  write_wav(path, w);
  auto back = read_wav(path);
  CHECK(back.sample_rate == 16000);
  CHECK(back.samples == w.samples);

  auto d = to_double(back);
  CHECK(d.size() == w.samples.size());
  CHECK(d[0] == 0.0);
  CHECK(d[3] == doctest::Approx(32767.0 / 32768.0));
  CHECK(d[4] == doctest::Approx(-1.0));

  // Stereo file: patch the channel count in the fmt chunk.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(22);  // channel count field of the canonical header
    char two[2] = {2, 0};
    f.write(two, 2);
  }
  CHECK_THROWS_WITH_AS(read_wav(path), doctest::Contains("mono"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("config parsing") {
  auto path = tmp("dpsa_test.cfg");
  {
    std::ofstream f(path);
    f << "# comment line\n";
    f << "epsilon=1.5\n";
    f << "\n";
    f << "seed=42\n";
    f << "name=pitch model\n";
  }
  auto cfg = read_config(path);
  CHECK(cfg.size() == 3);
  CHECK(cfg.at("epsilon") == "1.5");
  CHECK(cfg.at("seed") == "42");
  CHECK(cfg.at("name") == "pitch model");
  std::remove(path.c_str());
  CHECK_THROWS(read_config(path));
}

TEST_CASE("report writing") {
  auto path = tmp("dpsa_report.txt");
  write_report(path, {{"eer", "0.25"}, {"p_asi", "40.0"}});
  auto back = read_config(path);  // same key=value grammar
  CHECK(back.at("eer") == "0.25");
  CHECK(back.at("p_asi") == "40.0");
  std::remove(path.c_str());
}

TEST_CASE("logmel framing arithmetic and tone energy") {
  const int sr = 16000;
  WaveformRecord w;
  w.sample_rate = sr;
  w.samples.resize(sr);  // 1 s
  for (int i = 0; i < sr; ++i) {
    w.samples[i] = static_cast<std::int16_t>(8000.0 * std::sin(2.0 * M_PI * 1000.0 * i / sr));
  }
  auto m = logmel_features(w, 20);
  const int frame = sr / 40, hop = sr / 100;  // 25 ms / 10 ms
  CHECK(m.rows == (sr - frame) / hop + 1);
  CHECK(m.cols == 20);

  // The 1 kHz band should dominate: locate the max-energy mel bin of a middle
  // frame and check it is neither the lowest nor the highest band.
  int mid = m.rows / 2;
  int best = 0;
  for (int c = 1; c < m.cols; ++c) {
    if (m.at(mid, c) > m.at(mid, best)) best = c;
  }
  CHECK(best > 0);
  CHECK(best < m.cols - 1);
  // Energy concentration: the winning band clearly beats the far bands.
  CHECK(m.at(mid, best) > m.at(mid, m.cols - 1) + 2.0);

  // Silence hits the log floor everywhere.
  WaveformRecord quiet;
  quiet.sample_rate = sr;
  quiet.samples.assign(sr / 2, 0);
  auto flat = logmel_features(quiet, 20);
  for (double v : flat.v) CHECK(v == doctest::Approx(std::log(1e-10)).epsilon(1e-9));

  WaveformRecord tiny;
  tiny.sample_rate = sr;
  tiny.samples.assign(10, 0);
  CHECK_THROWS(logmel_features(tiny, 20));
}
