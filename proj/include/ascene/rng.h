// ascene/rng.h

// Copyright 2026  The ascene Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef ASCENE_RNG_H_
#define ASCENE_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace ascene {

/// SplitMix64 finalizer. Used to decorrelate seeds built from small integers.
constexpr uint64_t MixBits(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Folds a list of integers (e.g. corpus seed, class index, clip index) into
/// one 64-bit seed.
inline uint64_t DeriveSeed(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x6A09E667F3BCC909ULL;
  for (uint64_t p : parts) h = MixBits(h ^ MixBits(p));
  return h;
}

/// xorshift64* generator (Vigna 2014): state ^= state >> 12, << 25, >> 27,
/// output = state * 0x2545F4914F6CDD1D. The state is seeded through MixBits
/// so that any seed, including 0, gives a nonzero state.
///
/// Satisfies UniformRandomBitGenerator, so it can drive <random>
/// distributions. Sequences are reproducible within one build; nothing here
/// promises equality across standard libraries for the distribution helpers.
class Rng {
 public:
  using result_type = uint64_t;

  explicit Rng(uint64_t seed = 0) { Seed(seed); }

  void Seed(uint64_t seed) {
    state_ = MixBits(seed);
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
    normal_ = std::normal_distribution<double>(0.0, 1.0);
  }

  static constexpr result_type min() { return 1; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double Uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  uint64_t Index(uint64_t n) {
    return static_cast<uint64_t>(Uniform() * static_cast<double>(n)) % n;
  }

  double Normal() { return normal_(*this); }

  /// Beta(a, b) through two gamma draws.
  double Beta(double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    double x = ga(*this);
    double y = gb(*this);
    if (x + y <= 0.0) return 0.5;
    return x / (x + y);
  }

 private:
  uint64_t state_ = 0;
  std::normal_distribution<double> normal_;
};

}  // namespace ascene

#endif  // ASCENE_RNG_H_
