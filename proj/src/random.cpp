// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/random.hpp"

#include <cmath>
#include <numbers>

#include "grnfuse/errors.hpp"

namespace grnfuse {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t));
  return h;
}

Rng make_rng(std::initializer_list<std::uint64_t> tags) { return Rng(mix_seed(tags)); }

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw ContractError("uniform_index over an empty range");
  // 2^64 mod n values at the bottom of the range would bias the modulus.
  const std::uint64_t threshold = (0 - n) % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x < threshold);
  return x % n;
}

double uniform01(Rng& rng) {
  // 53 random mantissa bits -> [0, 1).
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
  // Box-Muller; one value per call keeps streams stateless between calls.
  double u1;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace grnfuse
