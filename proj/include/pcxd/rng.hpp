// SPDX-License-Identifier: Apache-2.0
//
// splitmix64 generator: the fixed PRNG behind every seeded artifact (scenes,
// parameter init, test instances), so seeds reproduce byte-identically across
// platforms.

#pragma once

#include <cmath>
#include <cstdint>

#include "pcxd/tensor.hpp"

namespace pcxd {

class SplitMix64 {
public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive range
  int uniform_int(int lo, int hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next() % span);
  }

  double normal(double mu = 0.0, double sd = 1.0) {
    if (have_cached_) {
      have_cached_ = false;
      return mu + sd * cached_;
    }
    // Box-Muller; u1 in (0,1]
    const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return mu + sd * r * std::cos(a);
  }

private:
  uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Derives an independent substream for (seed, tag); tags keep modules'
// draws decoupled so adding draws in one module does not shift another.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
  uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL + (tag << 6) + (tag >> 2));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Tensor randn(std::vector<int> shape, SplitMix64& rng, real sd = real(1)) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<real>(rng.normal(0.0, static_cast<double>(sd)));
  return t;
}

inline Tensor rand_uniform(std::vector<int> shape, SplitMix64& rng, real lo, real hi) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<real>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
  return t;
}

// Xavier-style scale for a fan_in x fan_out linear map.
inline Tensor init_linear(int fan_in, int fan_out, SplitMix64& rng) {
  const real sd = static_cast<real>(std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)));
  return randn({fan_in, fan_out}, rng, sd);
}

}  // namespace pcxd
