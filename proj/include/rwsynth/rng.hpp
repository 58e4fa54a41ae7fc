// Copyright 2026 The rwsynth Authors
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
#pragma once

// Seeded random streams. Every stochastic stage draws from a generator that
// is a pure function of (master seed, stage name, index), so reruns with the
// same seed are bit-identical and stages do not perturb one another.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace rwsynth {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Seed for a named substream of `master`, optionally indexed (chain,
/// replicate, dataset number).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ fnv1a(name)) + index);
}

inline Rng make_rng(std::uint64_t master, std::string_view name,
                    std::uint64_t index = 0) {
  std::seed_seq seq{derive_seed(master, name, index)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double std_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// log of a Gamma(shape, 1) draw. Small shapes are handled through
/// G(a) = G(a + 1) * U^(1/a) so the result stays finite when the draw
/// itself would underflow.
inline double log_gamma_draw(double shape, Rng& rng) {
  if (shape >= 1.0) {
    return std::log(std::gamma_distribution<double>(shape, 1.0)(rng));
  }
  double g = std::gamma_distribution<double>(shape + 1.0, 1.0)(rng);
  double u = uniform01(rng);
  while (u <= 0.0) u = uniform01(rng);
  return std::log(g) + std::log(u) / shape;
}

/// Negative binomial draw with mean `mu` and dispersion `phi`
/// (variance mu + mu^2 / phi), via the gamma-Poisson mixture.
inline double negative_binomial_draw(double mu, double phi, Rng& rng) {
  double lambda = std::gamma_distribution<double>(phi, mu / phi)(rng);
  if (!(lambda > 0.0)) return 0.0;
  if (lambda > 1e15) return std::round(lambda);
  return static_cast<double>(
      std::poisson_distribution<std::int64_t>(lambda)(rng));
}

}  // namespace rwsynth
