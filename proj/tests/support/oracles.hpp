// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations written straight from the definitions, with no
// shared code paths into the library. Slow on purpose.

#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "grnfuse/random.hpp"
#include "grnfuse/tensor.hpp"

namespace grnfuse::testing {

// Hits after each of the first ceil(frac * n) ranks, summed, over the best
// achievable sum. Ties in expression rank by gene index.
inline double recovery_oracle(const std::vector<double>& x, const std::vector<std::size_t>& targets, double frac) {
  const std::size_t n = x.size();
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t g = 0; g < n; ++g) ranked.emplace_back(-x[g], g);
  std::sort(ranked.begin(), ranked.end());
  std::size_t cutoff = 0;
  while (static_cast<double>(cutoff) < frac * static_cast<double>(n) - 1e-9) ++cutoff;
  const std::set<std::size_t> t(targets.begin(), targets.end());
  double area = 0, best = 0;
  for (std::size_t r = 0; r < cutoff; ++r) {
    std::size_t hits = 0;
    for (std::size_t q = 0; q <= r; ++q) hits += t.count(ranked[q].second);
    area += static_cast<double>(hits);
    best += static_cast<double>(std::min(r + 1, t.size()));
  }
  return area / best;
}

// 0.5 N(0.2, 0.05^2) + 0.5 N(0.7, 0.05^2)
inline std::vector<double> mixture_draws(std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng({seed});
  std::vector<double> out(n);
  for (double& v : out) v = (uniform01(rng) < 0.5 ? 0.2 : 0.7) + 0.05 * standard_normal(rng);
  return out;
}

inline Tensor random_stochastic(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor a(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += (a(i, j) = uniform01(rng) + 1e-3);
    for (std::size_t j = 0; j < cols; ++j) a(i, j) /= z;
  }
  return a;
}

inline std::vector<double> importance_oracle(const std::vector<Tensor>& heads) {
  const std::size_t n = heads.front().rows();
  std::vector<double> phi(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (const Tensor& a : heads)
      for (std::size_t i = 0; i < n; ++i) s += a(i, j);
    phi[j] = s / static_cast<double>(heads.size() * n);
  }
  return phi;
}

inline double enrichment_oracle(const std::vector<double>& phi, const std::vector<bool>& is_tf) {
  double tf = 0, rest = 0, ntf = 0, nrest = 0;
  for (std::size_t j = 0; j < phi.size(); ++j) {
    if (is_tf[j]) {
      tf += phi[j];
      ntf += 1;
    } else {
      rest += phi[j];
      nrest += 1;
    }
  }
  return (tf / ntf) / (rest / nrest);
}

inline double two_pass_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Every (positive, negative) pair: a win counts 1, a tie 1/2.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (l[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

}  // namespace grnfuse::testing
