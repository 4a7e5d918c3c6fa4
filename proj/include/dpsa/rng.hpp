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

#ifndef DPSA_RNG_HPP
#define DPSA_RNG_HPP

#include <cstdint>
#include <random>

namespace dpsa {

/// Counter-based pseudo-random source (SplitMix64 output function).
/// Draw i of stream s under seed g is a pure function of (g, s, i), so
/// streams can be split across threads and individual draws re-indexed
/// without sharing state.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : base_(mix(seed ^ 0x2545F4914F6CDD1DULL, stream)), counter_(0) {}

  /// Independent stream derived from this one's seed material.
  Rng split(std::uint64_t stream) const { return Rng::from_base(mix(base_, stream)); }

  /// Fresh generator seeded from OS entropy. Production noise must not be
  /// replayable, so deployment code paths use this instead of a fixed seed.
  static Rng from_entropy() {
    std::random_device rd;
    std::uint64_t hi = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    return Rng(hi, rd());
  }

  std::uint64_t next_u64() { return value_at(counter_++); }

  /// Draw with explicit index; does not advance the counter.
  std::uint64_t u64_at(std::uint64_t index) const { return value_at(index); }

  /// Uniform in the open interval (0, 1).
  double uniform_open() { return to_open01(next_u64()); }

  /// Uniform in (0,1) at an explicit draw index.
  double uniform_open_at(std::uint64_t index) const { return to_open01(value_at(index)); }

  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

 private:
  static Rng from_base(std::uint64_t base) {
    Rng r(0, 0);
    r.base_ = base;
    r.counter_ = 0;
    return r;
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t value_at(std::uint64_t index) const {
    std::uint64_t z = base_ + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static double to_open01(std::uint64_t x) {
    // 53-bit mantissa, offset by half a ulp so 0 and 1 are excluded.
    return (static_cast<double>(x >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

  std::uint64_t base_;
  std::uint64_t counter_;
};

}  // namespace dpsa

#endif  // DPSA_RNG_HPP
