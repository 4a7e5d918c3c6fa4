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

#ifndef DPSA_IO_HPP
#define DPSA_IO_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dpsa/nn.hpp"
#include "dpsa/pitch.hpp"

namespace dpsa {

// ---------------------------------------------------------------------------
// Binary primitives. All multi-byte values little-endian; floats stored as
// 32-bit on disk, 64-bit in computation. Parse errors name the offset and
// what was expected.
// ---------------------------------------------------------------------------

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path);
  std::uint8_t u8(const char* what);
  std::uint32_t u32(const char* what);
  float f32(const char* what);
  double f64(const char* what);
  void expect_magic(const char magic[4]);
  void read_f32_block(std::vector<double>& out, std::size_t count, const char* what);
  std::size_t offset() const { return pos_; }
  std::string path() const { return path_; }

 private:
  void need(std::size_t n, const char* what);
  std::string path_;
  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
};

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path);
  ~BinaryWriter();
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void magic(const char m[4]);
  void write_f32_block(const std::vector<double>& v);

 private:
  std::string path_;
  std::vector<std::uint8_t> buf_;
};

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

struct WaveformRecord {
  std::vector<std::int16_t> samples;
  int sample_rate = 0;
  // mono only
};

WaveformRecord read_wav(const std::string& path);
void write_wav(const std::string& path, const WaveformRecord& w);
std::vector<double> to_double(const WaveformRecord& w);  // scaled to [-1, 1)

// `dpf0 v1`: text header then one value per line, frame order.
void write_pitch_file(const std::string& path, const PitchSequence& p);
PitchSequence read_pitch_file(const std::string& path);

// `DPAF`: magic, version byte, u32 rows, u32 cols, row-major float32.
void write_feature_file(const std::string& path, const Matrix& m);
Matrix read_feature_file(const std::string& path);

// `DPXV`: magic, version byte, u32 N, u32 D, row-major float32.
void write_vector_pool(const std::string& path, const Matrix& pool);
Matrix read_vector_pool(const std::string& path);

// `dplab v1`: text header then one class id per line.
void write_label_file(const std::string& path, const std::vector<int>& labels);
std::vector<int> read_label_file(const std::string& path);

// Flat `key=value` config with `#` comments. Empty lines ignored.
std::map<std::string, std::string> read_config(const std::string& path);

// Flat key=value metric report.
void write_report(const std::string& path, const std::map<std::string, std::string>& kv);

// ---------------------------------------------------------------------------
// Acoustic front end
// ---------------------------------------------------------------------------

/// Log-mel spectrogram: 25 ms Hann frames, 10 ms hop, radix-2 FFT, mel
/// filterbank, log with floor 1e-10. One row per hop; n_mels columns.
Matrix logmel_features(const WaveformRecord& w, int n_mels);

}  // namespace dpsa

#endif  // DPSA_IO_HPP
