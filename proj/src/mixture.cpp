// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "grnfuse/errors.hpp"
#include "grnfuse/random.hpp"

namespace grnfuse {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

double log_normal(double x, double mean, double variance) {
  const double d = x - mean;
  return -kLogSqrt2Pi - 0.5 * std::log(variance) - d * d / (2.0 * variance);
}

double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

Moments moments(std::span<const double> x) {
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  for (double v : x) m.variance += (v - m.mean) * (v - m.mean);
  m.variance /= static_cast<double>(x.size());
  return m;
}

// Runs EM from `model` until convergence. Returns false if a component loses
// all responsibility mass.
bool run_em(std::span<const double> x, GaussianMixtureModel& model, const GmmOptions& opt) {
  const std::size_t n = x.size();
  std::vector<double> resp(n);  // responsibility of component 1
  model.trace.clear();
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t it = 0;; ++it) {
    const double lw0 = std::log(model.weight[0]);
    const double lw1 = std::log(model.weight[1]);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = lw0 + log_normal(x[i], model.mean[0], model.variance[0]);
      const double b = lw1 + log_normal(x[i], model.mean[1], model.variance[1]);
      const double lse = log_sum_exp(a, b);
      ll += lse;
      resp[i] = std::exp(b - lse);
    }
    model.trace.push_back(ll);
    model.log_likelihood = ll;
    model.iterations = it;
    if (it > 0 && ll - prev < opt.tolerance) return true;
    if (it >= opt.max_iterations) return true;
    prev = ll;

    double n1 = 0.0, s1 = 0.0, s0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      n1 += resp[i];
      s1 += resp[i] * x[i];
      s0 += (1.0 - resp[i]) * x[i];
    }
    const double n0 = static_cast<double>(n) - n1;
    if (n0 <= 1e-300 || n1 <= 1e-300) return false;
    const double m0 = s0 / n0, m1 = s1 / n1;
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v0 += (1.0 - resp[i]) * (x[i] - m0) * (x[i] - m0);
      v1 += resp[i] * (x[i] - m1) * (x[i] - m1);
    }
    model.weight = {n0 / static_cast<double>(n), n1 / static_cast<double>(n)};
    model.mean = {m0, m1};
    model.variance = {std::max(v0 / n0, opt.variance_floor), std::max(v1 / n1, opt.variance_floor)};
  }
}

}  // namespace

double GaussianMixtureModel::sigma(std::size_t k) const { return std::sqrt(variance.at(k)); }

double GaussianMixtureModel::weighted_density(std::size_t k, double x) const {
  return weight.at(k) * std::exp(log_normal(x, mean.at(k), variance.at(k)));
}

double mixture_log_likelihood(const GaussianMixtureModel& model, std::span<const double> samples) {
  double ll = 0.0;
  for (double v : samples) {
    ll += log_sum_exp(std::log(model.weight[0]) + log_normal(v, model.mean[0], model.variance[0]),
                      std::log(model.weight[1]) + log_normal(v, model.mean[1], model.variance[1]));
  }
  return ll;
}

GaussianMixtureModel fit_gmm2(std::span<const double> samples, std::uint64_t seed, const GmmOptions& options) {
  if (samples.size() < 20) {
    throw ContractError("fit_gmm2 needs at least 20 samples, got " + std::to_string(samples.size()));
  }
  for (double v : samples) {
    if (!std::isfinite(v)) throw DataError("fit_gmm2: non-finite sample");
  }
  const Moments all = moments(samples);
  if (all.variance == 0.0) throw DegenerateDataError("fit_gmm2: all samples are equal");

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t half = sorted.size() / 2;
  const Moments lower = moments(std::span<const double>(sorted).first(half));
  const Moments upper = moments(std::span<const double>(sorted).subspan(half));
  const double floor = options.variance_floor;
  const double spread = std::sqrt(all.variance);

  GaussianMixtureModel best;
  bool have_best = false;
  const std::size_t restarts = std::max<std::size_t>(options.restarts, 1);
  for (std::size_t r = 0; r < restarts; ++r) {
    GaussianMixtureModel model;
    model.mean = {lower.mean, upper.mean};
    model.variance = {std::max(lower.variance, floor), std::max(upper.variance, floor)};
    if (r > 0) {
      Rng rng = make_rng({seed, tag(Stream::kGmm), r});
      model.mean[0] += 0.25 * spread * standard_normal(rng);
      model.mean[1] += 0.25 * spread * standard_normal(rng);
      const double w = 0.3 + 0.4 * uniform01(rng);
      model.weight = {w, 1.0 - w};
    }
    if (!run_em(samples, model, options)) continue;
    if (!have_best || model.log_likelihood > best.log_likelihood) {
      best = std::move(model);
      have_best = true;
    }
  }
  if (!have_best) throw NumericError("fit_gmm2: every restart collapsed a component");

  if (best.mean[0] > best.mean[1]) {
    std::swap(best.mean[0], best.mean[1]);
    std::swap(best.variance[0], best.variance[1]);
    std::swap(best.weight[0], best.weight[1]);
  }
  return best;
}

std::string to_string(Modality m) { return m == Modality::kBimodal ? "bimodal" : "skewed"; }

std::string to_string(ThresholdMethod m) {
  return m == ThresholdMethod::kIntersection ? "intersection" : "mu-plus-2-sigma";
}

Modality classify_distribution(const GaussianMixtureModel& model, const BimodalityRule& rule) {
  const double min_w = std::min(model.weight[0], model.weight[1]);
  const double sep = std::abs(model.mean[1] - model.mean[0]);
  const double widest = std::max(model.sigma(0), model.sigma(1));
  return (min_w >= rule.min_weight && sep >= rule.separation * widest) ? Modality::kBimodal
                                                                       : Modality::kSkewed;
}

ThresholdDecision select_threshold(const GaussianMixtureModel& model, Modality classification) {
  ThresholdDecision d;
  d.classification = classification;
  if (classification == Modality::kSkewed) {
    const std::size_t dom = model.weight[1] > model.weight[0] ? 1 : 0;
    d.method = ThresholdMethod::kMuPlus2Sigma;
    d.threshold = model.mean[dom] + 2.0 * model.sigma(dom);
    return d;
  }

  const double m1 = model.mean[0], m2 = model.mean[1];
  const double v1 = model.variance[0], v2 = model.variance[1];
  if (!(m1 < m2)) throw NumericError("select_threshold: bimodal model needs distinct ordered means");
  // log(pi1 N1(x)) - log(pi2 N2(x)) = a x^2 + b x + c
  const double a = 1.0 / (2.0 * v2) - 1.0 / (2.0 * v1);
  const double b = m1 / v1 - m2 / v2;
  const double c = m2 * m2 / (2.0 * v2) - m1 * m1 / (2.0 * v1) +
                   std::log(model.weight[0] / model.weight[1]) + 0.5 * std::log(v2 / v1);
  auto f = [&](double x) { return (a * x + b) * x + c; };

  std::vector<double> roots;
  if (std::abs(a) <= 1e-12 * (std::abs(b) + 1e-300)) {
    roots.push_back(-c / b);
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
      if (q != 0.0) roots.push_back(c / q);
      roots.push_back(q / a);
    }
  }
  const double tol = 1e-12 * (std::abs(m1) + std::abs(m2) + 1.0);
  double root = std::numeric_limits<double>::quiet_NaN();
  for (double r : roots) {
    if (r >= m1 - tol && r <= m2 + tol) {
      root = std::clamp(r, m1, m2);
      break;
    }
  }
  if (std::isnan(root)) throw NumericError("select_threshold: no density intersection between the means");

  // Newton polish on the log-ratio; f is monotone on [mu1, mu2] near the root.
  for (int i = 0; i < 3; ++i) {
    const double slope = 2.0 * a * root + b;
    if (slope == 0.0) break;
    const double next = root - f(root) / slope;
    if (!(next >= m1 && next <= m2) || std::abs(f(next)) >= std::abs(f(root))) break;
    root = next;
  }
  d.method = ThresholdMethod::kIntersection;
  d.threshold = root;
  return d;
}

}  // namespace grnfuse
