// Copyright 2026 The symface Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace symface {

/// Seedable generator with platform-stable draws. std::mt19937_64 output is
/// fully specified by the standard; the distribution helpers below are
/// written out so that results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Derives an independent stream from a base seed and a list of keys
  /// (step index, batch slot, ...). splitmix64 finalizer per key.
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = mix(seed ^ 0x9E3779B97F4A7C15ULL);
    for (std::uint64_t k : keys) h = mix(h ^ (k + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2)));
    return Rng(h);
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  double normal() {
    // Box-Muller; the second variate is discarded to keep the stream simple.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Normal(0, sigma) resampled until it falls inside [-2 sigma, 2 sigma].
  double truncated_normal(double sigma) {
    for (;;) {
      const double z = normal();
      if (std::abs(z) <= 2.0) return z * sigma;
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace symface
