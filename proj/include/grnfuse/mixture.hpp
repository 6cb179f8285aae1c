// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-component 1-D Gaussian mixture, fitted by EM, and the activity threshold
// rules built on it: the weighted-density intersection for bimodal
// distributions and mu + 2 sigma of the dominant component otherwise.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace grnfuse {

struct GaussianMixtureModel {
  std::array<double, 2> weight{0.5, 0.5};  // pi, sums to 1
  std::array<double, 2> mean{0.0, 0.0};    // ascending
  std::array<double, 2> variance{1.0, 1.0};
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  // Log-likelihood after every E-step of the winning restart.
  std::vector<double> trace;

  double sigma(std::size_t k) const;
  // pi_k * N(x | mu_k, sigma_k^2)
  double weighted_density(std::size_t k, double x) const;
};

struct GmmOptions {
  std::size_t restarts = 5;
  double tolerance = 1e-8;  // stop once the log-likelihood gain falls below
  std::size_t max_iterations = 500;
  double variance_floor = 1e-6;
};

// Needs >= 20 samples; throws DegenerateDataError when all samples are equal.
GaussianMixtureModel fit_gmm2(std::span<const double> samples, std::uint64_t seed,
                              const GmmOptions& options = {});

double mixture_log_likelihood(const GaussianMixtureModel& model, std::span<const double> samples);

enum class Modality { kBimodal, kSkewed };
enum class ThresholdMethod { kIntersection, kMuPlus2Sigma };

std::string to_string(Modality m);
std::string to_string(ThresholdMethod m);

struct BimodalityRule {
  double min_weight = 0.15;
  double separation = 2.0;  // |mu2 - mu1| >= separation * max(sigma1, sigma2)
};

Modality classify_distribution(const GaussianMixtureModel& model, const BimodalityRule& rule = {});

struct ThresholdDecision {
  Modality classification = Modality::kSkewed;
  double threshold = 0.0;
  ThresholdMethod method = ThresholdMethod::kMuPlus2Sigma;
};

// Bimodal: root of pi1 N1(x) = pi2 N2(x) inside [mu1, mu2]; NumericError if
// none exists. Skewed: mu + 2 sigma of the component with the larger weight.
ThresholdDecision select_threshold(const GaussianMixtureModel& model, Modality classification);

}  // namespace grnfuse
