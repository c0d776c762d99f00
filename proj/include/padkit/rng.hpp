// Copyright 2026 The padkit Authors.
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

#ifndef PADKIT_RNG_HPP
#define PADKIT_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace padkit {

/// Mixes a base seed with a path of integer tags (splitmix64 finalizer per
/// step). Every random stream in the toolkit is derived this way from the
/// single user seed, e.g. derive_seed(seed, {kStreamStitch, epoch, sample}).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

/// Seeded random stream. The engine is std::mt19937_64; the distribution
/// helpers are written out here because the std:: distributions are not
/// specified bit-for-bit across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// True with probability p; p <= 0 never fires and p >= 1 always fires.
  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal (Box-Muller, pairs cached).
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream tags passed as the first element of a derive_seed path.
enum StreamTag : std::uint64_t {
  kStreamInit = 1,
  kStreamShuffle = 2,
  kStreamStitch = 3,
  kStreamAugment = 4,
  kStreamSynth = 5,
  kStreamPreview = 6,
};

}  // namespace padkit

#endif  // PADKIT_RNG_HPP
