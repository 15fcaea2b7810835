// Copyright 2026 The Refgame Authors
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

#ifndef REFGAME_RNG_H_
#define REFGAME_RNG_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace refgame {

// Mixes a 64-bit value (splitmix64 finalizer).
std::uint64_t MixBits(std::uint64_t x);

// Derives an independent stream seed from a parent seed and a stream id.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream);

// Seeded deterministic generator. The raw bit stream is std::mt19937_64,
// which the standard pins exactly; the conversions to uniform, normal and
// Gumbel variates are implemented here so that a given seed produces the
// same samples with every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t NextBits() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::size_t UniformInt(std::size_t n);
  bool Bernoulli(double p) { return Uniform() < p; }
  // Standard normal via Box-Muller.
  double Normal();
  // Gumbel(0, 1) with the uniform draw clamped to (eps, 1 - eps).
  double Gumbel(double eps = 1e-10);

  // Independent child generator for the given stream id.
  Rng Fork(std::uint64_t stream) const { return Rng(DeriveSeed(seed_, stream)); }

  template <typename T>
  void Shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = UniformInt(i);
      std::swap(values[i - 1], values[j]);
    }
  }
  template <typename T>
  void Shuffle(std::vector<T>& values) {
    Shuffle(std::span<T>(values));
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> SampleWithoutReplacement(std::size_t n,
                                                    std::size_t k);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace refgame

#endif  // REFGAME_RNG_H_
