// Copyright 2026 The Expost Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EXPOST_RANDOM_H_
#define EXPOST_RANDOM_H_

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace expost {

// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
// easy as 1, 2, 3"). Stateless: maps (counter, key) to 128 random bits.
std::array<uint32_t, 4> Philox4x32(std::array<uint32_t, 4> counter,
                                   std::array<uint32_t, 2> key);

// Mixes a list of words into a single 64-bit stream id. Used to key the
// per-path / per-trial streams so that trials can run in any order.
uint64_t StreamKey(std::initializer_list<uint64_t> words);

// Counter-based random stream keyed by (seed, stream). Satisfies
// UniformRandomBitGenerator. Copying an Rng copies its position, so two
// copies produce identical sequences.
class Rng {
 public:
  using result_type = uint64_t;

  Rng(uint64_t seed, uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()();

  // Independent child stream; does not advance this stream.
  Rng Split(uint64_t child) const;

  // Uniform on the open interval (0, 1), 53-bit resolution.
  double Uniform();
  double StandardNormal();
  // Exponential with unit rate.
  double Exponential();
  // Laplace with location 0 and the given scale (density exp(-|x|/s)/(2s)).
  double Laplace(double scale);

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }

 private:
  void Refill();

  uint64_t seed_;
  uint64_t stream_;
  uint64_t block_ = 0;
  std::array<uint32_t, 4> buffer_{};
  int buffered_words_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace expost

#endif  // EXPOST_RANDOM_H_
