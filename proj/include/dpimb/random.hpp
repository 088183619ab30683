/*
 * Copyright 2026 The dpimb Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <random>

#include "dpimb/error.hpp"

namespace dpimb {

// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for a sub-stream identified by a path of indices below a master seed.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix_seed(master);
  for (std::uint64_t p : path) s = mix_seed(s ^ mix_seed(p + 0x632be59bd9b4e019ULL));
  return s;
}

// Seeded random source. The engine output of std::mt19937_64 is fixed by the
// standard; every distribution below is an explicit transform of its raw
// 64-bit words so that sample streams are identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on the open interval (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, n), unbiased (rejection on the top range).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw InvalidParameter("uniform_index: n must be positive");
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via the Box-Muller transform; the second variate of each
  // pair is cached.
  double normal() {
    if (cached_normal_) {
      double z = *cached_normal_;
      cached_normal_.reset();
      return z;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_normal_ = radius * std::sin(angle);
    return radius * std::cos(angle);
  }

  // Exponential with the given scale (mean), by inversion.
  double exponential(double scale) { return -scale * std::log(uniform_open()); }

  // Laplace(0, scale) by inversion of the CDF.
  double laplace(double scale) {
    const double u = uniform_open() - 0.5;
    const double mag = -scale * std::log1p(-2.0 * std::abs(u));
    return u < 0 ? -mag : mag;
  }

  // Gamma with integer shape (Erlang): sum of shape exponentials.
  double gamma_integer_shape(int shape, double scale) {
    double total = 0.0;
    for (int i = 0; i < shape; ++i) total += exponential(scale);
    return total;
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> cached_normal_;
};

}  // namespace dpimb
