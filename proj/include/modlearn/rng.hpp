/*
 * Copyright 2026 The Modlearn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace modlearn {

/// Project-wide random number generator.
///
/// All randomness in the library flows through this class so that runs are
/// reproducible bit-for-bit across platforms. The core generator is
/// std::mt19937_64 (its output sequence is pinned by the C++ standard); the
/// distribution transforms below are implemented by hand because the standard
/// library's distribution objects are not portable across implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n). Rejection sampling, bias-free.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Standard normal via Box-Muller (both values used).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Deterministic sub-seed derivation: mixes a parent seed with a label.
///
/// Used to fan a single global seed out to every seeded component. The label
/// is hashed with FNV-1a and the combination is finalized with the SplitMix64
/// mixer, so distinct labels give statistically independent streams while the
/// whole tree of seeds remains a pure function of the global seed.
std::uint64_t split_seed(std::uint64_t parent, const std::string& label);

/// Numeric variant for user-supplied per-component seeds.
std::uint64_t split_seed(std::uint64_t parent, std::uint64_t label);

}  // namespace modlearn
