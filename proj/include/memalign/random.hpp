// Copyright 2026 The memalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MEMALIGN_RANDOM_HPP_
#define MEMALIGN_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>

namespace memalign {

// SplitMix64 state evolution. Doubles take the top 53 bits; normals use the
// cosine branch of Box-Muller, consuming exactly two uniforms per draw. The
// stream is fully specified so corpora can be regenerated bit-for-bit by
// other implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, bound) by multiply-shift.
  std::uint64_t below(std::uint64_t bound) {
    return std::uint64_t((static_cast<unsigned __int128>(next()) * bound) >>
                         64);
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

// Derives an independent seed for a named sub-stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 mix(seed ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
  return mix.next();
}

// Stream identifiers passed to derive_seed.
enum SeedStream : std::uint64_t {
  kStreamMemoryInit = 1,
  kStreamDecoderInit = 2,
  kStreamRenderer = 3,
  kStreamTrainSampling = 4,
  kStreamEvalShuffle = 5,
  kStreamProjectionInit = 6,
  kStreamPretrainSampling = 7,
  kStreamGradcheck = 8,
};

}  // namespace memalign

#endif  // MEMALIGN_RANDOM_HPP_
