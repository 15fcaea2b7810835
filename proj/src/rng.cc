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

#include "refgame/rng.h"

#include <cmath>
#include <numbers>
#include <unordered_map>

#include "refgame/errors.h"

namespace refgame {

std::uint64_t MixBits(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream) {
  return MixBits(MixBits(seed) ^ (stream * 0xd1b54a32d192ed03ULL + 1));
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double Rng::Uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::UniformInt(std::size_t n) {
  if (n == 0) throw ConfigError("UniformInt: empty range");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

double Rng::Normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = Uniform();
  while (u1 <= 0.0) u1 = Uniform();
  const double u2 = Uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double Rng::Gumbel(double eps) {
  double u = Uniform();
  if (u < eps) u = eps;
  if (u > 1.0 - eps) u = 1.0 - eps;
  return -std::log(-std::log(u));
}

std::vector<std::size_t> Rng::SampleWithoutReplacement(std::size_t n,
                                                       std::size_t k) {
  if (k > n) throw ConfigError("cannot sample more items than available");
  // Partial Fisher-Yates over a sparse swap map.
  std::unordered_map<std::size_t, std::size_t> swapped;
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + UniformInt(n - i);
    auto at = [&](std::size_t idx) {
      auto it = swapped.find(idx);
      return it == swapped.end() ? idx : it->second;
    };
    std::size_t vi = at(i);
    std::size_t vj = at(j);
    out.push_back(vj);
    swapped[j] = vi;
  }
  return out;
}

}  // namespace refgame
