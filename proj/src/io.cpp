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

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dpsa {

// ---------------------------------------------------------------------------
// Binary primitives
// ---------------------------------------------------------------------------

BinaryReader::BinaryReader(const std::string& path) : path_(path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  f.seekg(0, std::ios::end);
  auto n = f.tellg();
  f.seekg(0);
  data_.resize(static_cast<std::size_t>(n));
  f.read(reinterpret_cast<char*>(data_.data()), n);
}

void BinaryReader::need(std::size_t n, const char* what) {
  if (pos_ + n > data_.size()) {
    std::ostringstream os;
    os << path_ << ": truncated at offset " << pos_ << ": expected " << n << " bytes for " << what
       << ", " << (data_.size() - pos_) << " available";
    throw std::runtime_error(os.str());
  }
}

std::uint8_t BinaryReader::u8(const char* what) {
  need(1, what);
  return data_[pos_++];
}

std::uint32_t BinaryReader::u32(const char* what) {
  need(4, what);
  std::uint32_t v = static_cast<std::uint32_t>(data_[pos_]) |
                    (static_cast<std::uint32_t>(data_[pos_ + 1]) << 8) |
                    (static_cast<std::uint32_t>(data_[pos_ + 2]) << 16) |
                    (static_cast<std::uint32_t>(data_[pos_ + 3]) << 24);
  pos_ += 4;
  return v;
}

float BinaryReader::f32(const char* what) {
  std::uint32_t bits = u32(what);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

double BinaryReader::f64(const char* what) {
  need(8, what);
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | data_[pos_ + i];
  pos_ += 8;
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

void BinaryReader::expect_magic(const char magic[4]) {
  need(4, "magic");
  if (std::memcmp(data_.data() + pos_, magic, 4) != 0) {
    std::ostringstream os;
    os << path_ << ": bad magic at offset " << pos_ << ": expected '" << std::string(magic, 4)
       << "', got '" << std::string(reinterpret_cast<const char*>(data_.data() + pos_), 4) << "'";
    throw std::runtime_error(os.str());
  }
  pos_ += 4;
}

void BinaryReader::read_f32_block(std::vector<double>& out, std::size_t count, const char* what) {
  need(count * 4, what);
  out.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = static_cast<std::uint32_t>(data_[pos_]) |
                         (static_cast<std::uint32_t>(data_[pos_ + 1]) << 8) |
                         (static_cast<std::uint32_t>(data_[pos_ + 2]) << 16) |
                         (static_cast<std::uint32_t>(data_[pos_ + 3]) << 24);
    pos_ += 4;
    float f;
    std::memcpy(&f, &bits, 4);
    out[i] = static_cast<double>(f);
  }
}

BinaryWriter::BinaryWriter(const std::string& path) : path_(path) {}

BinaryWriter::~BinaryWriter() {
  std::ofstream f(path_, std::ios::binary);
  if (f) f.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
}

void BinaryWriter::u8(std::uint8_t v) { buf_.push_back(v); }

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void BinaryWriter::f32(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  u32(bits);
}

void BinaryWriter::f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
}

void BinaryWriter::magic(const char m[4]) {
  buf_.insert(buf_.end(), m, m + 4);
}

void BinaryWriter::write_f32_block(const std::vector<double>& v) {
  for (double d : v) f32(static_cast<float>(d));
}

// ---------------------------------------------------------------------------
// WAV (PCM16 mono)
// ---------------------------------------------------------------------------

WaveformRecord read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  auto rd_u32 = [&](const char* what) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) {
      throw std::runtime_error(path + ": truncated reading " + what);
    }
    return static_cast<std::uint32_t>(b[0]) | (b[1] << 8) | (b[2] << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  };
  auto rd_u16 = [&](const char* what) {
    unsigned char b[2];
    if (!f.read(reinterpret_cast<char*>(b), 2)) {
      throw std::runtime_error(path + ": truncated reading " + what);
    }
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  };
  char tag[4];
  f.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error(path + ": not a RIFF file");
  rd_u32("riff size");
  f.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error(path + ": not a WAVE file");

  WaveformRecord w;
  bool have_fmt = false;
  while (f.read(tag, 4)) {
    std::uint32_t chunk = rd_u32("chunk size");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      std::uint16_t fmt = rd_u16("audio format");
      std::uint16_t channels = rd_u16("channel count");
      w.sample_rate = static_cast<int>(rd_u32("sample rate"));
      rd_u32("byte rate");
      rd_u16("block align");
      std::uint16_t bits = rd_u16("bits per sample");
      if (fmt != 1 || bits != 16) throw std::runtime_error(path + ": unsupported format (PCM16 only)");
      if (channels != 1) throw std::runtime_error(path + ": unsupported format (mono only)");
      if (chunk > 16) f.seekg(chunk - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error(path + ": data chunk before fmt chunk");
      w.samples.resize(chunk / 2);
      if (!f.read(reinterpret_cast<char*>(w.samples.data()), chunk)) {
        throw std::runtime_error(path + ": truncated data chunk");
      }
      return w;
    } else {
      f.seekg(chunk + (chunk & 1), std::ios::cur);
    }
  }
  throw std::runtime_error(path + ": missing data chunk");
}

void write_wav(const std::string& path, const WaveformRecord& w) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  auto wr_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<char*>(b), 4);
  };
  auto wr_u16 = [&](std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    f.write(reinterpret_cast<char*>(b), 2);
  };
  std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  f.write("RIFF", 4);
  wr_u32(36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  wr_u32(16);
  wr_u16(1);
  wr_u16(1);
  wr_u32(static_cast<std::uint32_t>(w.sample_rate));
  wr_u32(static_cast<std::uint32_t>(w.sample_rate * 2));
  wr_u16(2);
  wr_u16(16);
  f.write("data", 4);
  wr_u32(data_bytes);
  f.write(reinterpret_cast<const char*>(w.samples.data()), data_bytes);
}

std::vector<double> to_double(const WaveformRecord& w) {
  std::vector<double> out(w.samples.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = w.samples[i] / 32768.0;
  return out;
}

// ---------------------------------------------------------------------------
// Text formats
// ---------------------------------------------------------------------------

void write_pitch_file(const std::string& path, const PitchSequence& p) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.precision(17);
  f << "dpf0 v1\n";
  for (double v : p.values) f << v << "\n";
}

PitchSequence read_pitch_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string header;
  std::getline(f, header);
  if (header != "dpf0 v1") throw std::runtime_error(path + ": bad header '" + header + "'");
  PitchSequence p;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    p.values.push_back(std::stod(line));
  }
  return p;
}

void write_feature_file(const std::string& path, const Matrix& m) {
  BinaryWriter w(path);
  w.magic("DPAF");
  w.u8(1);
  w.u32(static_cast<std::uint32_t>(m.rows));
  w.u32(static_cast<std::uint32_t>(m.cols));
  w.write_f32_block(m.v);
}

Matrix read_feature_file(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("DPAF");
  std::uint8_t version = r.u8("version");
  if (version != 1) throw std::runtime_error(path + ": unsupported DPAF version");
  Matrix m;
  m.rows = static_cast<int>(r.u32("row count"));
  m.cols = static_cast<int>(r.u32("column count"));
  r.read_f32_block(m.v, static_cast<std::size_t>(m.rows) * m.cols, "feature values");
  return m;
}

void write_vector_pool(const std::string& path, const Matrix& pool) {
  BinaryWriter w(path);
  w.magic("DPXV");
  w.u8(1);
  w.u32(static_cast<std::uint32_t>(pool.rows));
  w.u32(static_cast<std::uint32_t>(pool.cols));
  w.write_f32_block(pool.v);
}

Matrix read_vector_pool(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("DPXV");
  std::uint8_t version = r.u8("version");
  if (version != 1) throw std::runtime_error(path + ": unsupported DPXV version");
  Matrix m;
  m.rows = static_cast<int>(r.u32("vector count"));
  m.cols = static_cast<int>(r.u32("vector dimension"));
  r.read_f32_block(m.v, static_cast<std::size_t>(m.rows) * m.cols, "vector values");
  return m;
}

void write_label_file(const std::string& path, const std::vector<int>& labels) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "dplab v1\n";
  for (int l : labels) f << l << "\n";
}

std::vector<int> read_label_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string header;
  std::getline(f, header);
  if (header != "dplab v1") throw std::runtime_error(path + ": bad header '" + header + "'");
  std::vector<int> labels;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    labels.push_back(std::stoi(line));
  }
  return labels;
}

std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto strip = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error(path + ": malformed line '" + line + "'");
    kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  return kv;
}

void write_report(const std::string& path, const std::map<std::string, std::string>& kv) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& [k, v] : kv) f << k << "=" << v << "\n";
}

// ---------------------------------------------------------------------------
// Log-mel front end
// ---------------------------------------------------------------------------

namespace {

void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * M_PI / static_cast<double>(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        auto u = a[i + j];
        auto v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

Matrix logmel_features(const WaveformRecord& w, int n_mels) {
  if (w.sample_rate < 8000) throw std::invalid_argument("logmel_features: sample rate must be >= 8 kHz");
  if (n_mels < 1) throw std::invalid_argument("logmel_features: n_mels must be positive");
  const int frame = w.sample_rate / 40;  // 25 ms
  const int hop = w.sample_rate / 100;   // 10 ms
  if (static_cast<int>(w.samples.size()) < frame) {
    throw std::invalid_argument("logmel_features: waveform shorter than one frame");
  }
  std::size_t nfft = 1;
  while (nfft < static_cast<std::size_t>(frame)) nfft <<= 1;
  const std::size_t nbins = nfft / 2 + 1;

  // Triangular mel filterbank between 0 Hz and Nyquist.
  const double mel_lo = hz_to_mel(0.0), mel_hi = hz_to_mel(w.sample_rate / 2.0);
  std::vector<double> centers(n_mels + 2);
  for (int m = 0; m < n_mels + 2; ++m) {
    centers[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (n_mels + 1));
  }
  std::vector<std::vector<double>> fbank(n_mels, std::vector<double>(nbins, 0.0));
  for (int m = 0; m < n_mels; ++m) {
    for (std::size_t k = 0; k < nbins; ++k) {
      double hz = static_cast<double>(k) * w.sample_rate / static_cast<double>(nfft);
      if (hz >= centers[m] && hz <= centers[m + 1] && centers[m + 1] > centers[m]) {
        fbank[m][k] = (hz - centers[m]) / (centers[m + 1] - centers[m]);
      } else if (hz > centers[m + 1] && hz <= centers[m + 2] && centers[m + 2] > centers[m + 1]) {
        fbank[m][k] = (centers[m + 2] - hz) / (centers[m + 2] - centers[m + 1]);
      }
    }
  }

  std::vector<double> window(frame);
  for (int i = 0; i < frame; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (frame - 1));
  }

  const int n_frames = (static_cast<int>(w.samples.size()) - frame) / hop + 1;
  Matrix out(n_frames, n_mels);
  std::vector<std::complex<double>> spec(nfft);
  for (int t = 0; t < n_frames; ++t) {
    for (std::size_t i = 0; i < nfft; ++i) {
      double s = (i < static_cast<std::size_t>(frame))
                     ? (w.samples[t * hop + i] / 32768.0) * window[i]
                     : 0.0;
      spec[i] = {s, 0.0};
    }
    fft_radix2(spec);
    for (int m = 0; m < n_mels; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < nbins; ++k) {
        double p = std::norm(spec[k]);
        e += fbank[m][k] * p;
      }
      out.at(t, m) = std::log(std::max(e, 1e-10));
    }
  }
  return out;
}

}  // namespace dpsa
