// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace grnfuse {

using Rng = std::mt19937_64;

// Independent stream for a tuple of tags, e.g. (seed, step, cell, purpose).
// Streams depend only on the tags, never on how many draws other streams made,
// so parallel execution order cannot change results.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> tags);
Rng make_rng(std::initializer_list<std::uint64_t> tags);

// Stream purposes.
enum class Stream : std::uint64_t {
  kInit = 1,
  kBatch = 2,
  kMask = 3,
  kPerturbCell = 4,
  kPerturbType = 5,
  kSampleCell = 6,
  kSampleType = 7,
  kSynthetic = 8,
  kGmm = 9,
  kAnalysis = 10,
  kFinetune = 11,
};

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

// Uniform index in [0, n) via rejection; identical on every platform.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);
double uniform01(Rng& rng);
double standard_normal(Rng& rng);

}  // namespace grnfuse
