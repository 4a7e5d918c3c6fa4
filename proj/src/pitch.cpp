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

#include "dpsa/pitch.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dpsa/dp.hpp"

namespace dpsa {

namespace {

constexpr double kVoicingThreshold = 0.5;   // normalized autocorrelation peak
constexpr double kEnergyFloor = 1e-6;       // mean squared amplitude per frame

// Quadratic interpolation of the autocorrelation peak position.
double refine_peak(double ym1, double y0, double yp1, double lag) {
  double denom = ym1 - 2.0 * y0 + yp1;
  if (std::fabs(denom) < 1e-12) return lag;
  double shift = 0.5 * (ym1 - yp1) / denom;
  if (shift < -1.0 || shift > 1.0) return lag;
  return lag + shift;
}

}  // namespace

PitchSequence estimate_pitch(std::span<const double> waveform, int sample_rate_hz,
                             double f0_min_hz, double f0_max_hz) {
  if (waveform.empty()) throw std::invalid_argument("estimate_pitch: empty waveform");
  if (sample_rate_hz < 8000) {
    throw std::invalid_argument("estimate_pitch: sample rate must be >= 8 kHz");
  }
  if (!(f0_min_hz > 0.0) || !(f0_max_hz > f0_min_hz) || f0_max_hz >= sample_rate_hz / 2.0) {
    throw std::invalid_argument("estimate_pitch: f0 range must lie within Nyquist");
  }

  const int hop = sample_rate_hz / 100;  // 10 ms
  // Analysis window long enough for two periods at the lowest f0.
  const int win = std::min<int>(static_cast<int>(waveform.size()),
                                static_cast<int>(2.5 * sample_rate_hz / f0_min_hz));
  const int lag_min = std::max(1, static_cast<int>(sample_rate_hz / f0_max_hz));
  const int lag_max = std::min(win - 1, static_cast<int>(sample_rate_hz / f0_min_hz) + 1);

  PitchSequence out;
  const int n = static_cast<int>(waveform.size());
  for (int start = 0; start + win <= n || (start == 0 && win <= n); start += hop) {
    if (start + win > n) break;
    const double* x = waveform.data() + start;

    double energy = 0.0;
    for (int i = 0; i < win; ++i) energy += x[i] * x[i];
    double r0 = energy;
    energy /= win;
    if (energy < kEnergyFloor || lag_max <= lag_min) {
      out.values.push_back(0.0);
      continue;
    }

    // Normalized autocorrelation over the admissible lag range.
    std::vector<double> r(lag_max + 2, 0.0);
    for (int lag = lag_min - 1; lag <= lag_max + 1 && lag < win; ++lag) {
      if (lag < 1) continue;
      double acc = 0.0;
      for (int i = 0; i + lag < win; ++i) acc += x[i] * x[i + lag];
      r[lag] = acc / r0;
    }
    int best = lag_min;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
      if (r[lag] > r[best]) best = lag;
    }
    if (r[best] < kVoicingThreshold) {
      out.values.push_back(0.0);
      continue;
    }
    double lag = (best > lag_min && best < lag_max)
                     ? refine_peak(r[best - 1], r[best], r[best + 1], best)
                     : static_cast<double>(best);
    out.values.push_back(sample_rate_hz / lag);
  }
  if (out.values.empty()) out.values.push_back(0.0);
  return out;
}

VoicedView remove_zeros(const PitchSequence& p) {
  VoicedView view;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    if (p.values[i] == 0.0) {
      view.zero_positions.push_back(i);
    } else {
      view.voiced.push_back(p.values[i]);
    }
  }
  if (view.voiced.empty()) {
    throw std::invalid_argument("remove_zeros: sequence is entirely unvoiced");
  }
  return view;
}

std::pair<std::vector<double>, PitchStats> normalize(std::span<const double> voiced) {
  if (voiced.size() < 2) throw std::invalid_argument("normalize: need at least 2 values");
  double mean = 0.0;
  for (double v : voiced) mean += v;
  mean /= static_cast<double>(voiced.size());
  double var = 0.0;
  for (double v : voiced) var += (v - mean) * (v - mean);
  var /= static_cast<double>(voiced.size());
  double sd = std::sqrt(var);
  if (sd < 1e-6) throw std::invalid_argument("normalize: (near-)constant sequence");
  std::vector<double> z(voiced.size());
  for (std::size_t i = 0; i < voiced.size(); ++i) z[i] = (voiced[i] - mean) / sd;
  return {std::move(z), PitchStats{mean, sd}};
}

std::vector<double> pitch_convert(std::span<const double> z, const PitchStats& target) {
  if (!(target.std > 0.0)) throw std::invalid_argument("pitch_convert: target std must be positive");
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * target.std + target.mean;
  return out;
}

PitchSequence reinsert_zeros(const VoicedView& view, std::span<const double> replacement) {
  if (replacement.size() != view.voiced.size()) {
    throw std::invalid_argument("reinsert_zeros: replacement length mismatch");
  }
  PitchSequence out;
  out.values.assign(view.original_length(), 0.0);
  std::size_t zi = 0, vi = 0;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (zi < view.zero_positions.size() && view.zero_positions[zi] == i) {
      ++zi;
    } else {
      out.values[i] = replacement[vi++];
    }
  }
  return out;
}

std::vector<double> naive_dp_pitch(std::span<const double> z, double epsilon, Rng& rng) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("naive_dp_pitch: epsilon must be positive");
  const double b = 8.0 / epsilon;  // range width of the [-4,4] clip
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    double clipped = std::clamp(z[i], -4.0, 4.0);
    out[i] = clipped + sample_laplace(b, rng);
  }
  return out;
}

CorpusPitchSummary corpus_pitch_stats(std::span<const PitchSequence> corpus) {
  if (corpus.empty()) throw std::invalid_argument("corpus_pitch_stats: empty corpus");
  auto summarize = [](const std::vector<double>& xs, double& mn, double& mx, double& avg,
                      double& sd) {
    mn = *std::min_element(xs.begin(), xs.end());
    mx = *std::max_element(xs.begin(), xs.end());
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - m) * (x - m);
    var /= static_cast<double>(xs.size());
    avg = m;
    sd = std::sqrt(var);
  };
  std::vector<double> lengths, fractions;
  for (const auto& p : corpus) {
    lengths.push_back(static_cast<double>(p.values.size()));
    std::size_t nz = 0;
    for (double v : p.values) nz += (v != 0.0);
    fractions.push_back(p.values.empty() ? 0.0
                                         : static_cast<double>(nz) / static_cast<double>(p.values.size()));
  }
  CorpusPitchSummary s;
  summarize(lengths, s.length_min, s.length_max, s.length_avg, s.length_std);
  summarize(fractions, s.nonzero_min, s.nonzero_max, s.nonzero_avg, s.nonzero_std);
  return s;
}

}  // namespace dpsa
