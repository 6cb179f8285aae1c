// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "grnfuse/activity.hpp"
#include "grnfuse/errors.hpp"
#include "grnfuse/mixture.hpp"
#include "grnfuse/random.hpp"

using namespace grnfuse;
using grnfuse::testing::mixture_draws;
using grnfuse::testing::recovery_oracle;

namespace {

GaussianMixtureModel make_model(double w1, double m1, double s1, double m2, double s2) {
  GaussianMixtureModel g;
  g.weight = {w1, 1.0 - w1};
  g.mean = {m1, m2};
  g.variance = {s1 * s1, s2 * s2};
  return g;
}

}  // namespace

TEST_CASE("rank ties break by gene index") {
  const std::vector<double> x{1, 5, 5, 0, 2};
  CHECK(rank_genes(x) == std::vector<GeneIndex>{1, 2, 4, 0, 3});
}

TEST_CASE("aucell extremes") {
  Rng rng = make_rng({21});
  std::vector<double> x(200);
  for (double& v : x) v = uniform01(rng);
  const auto order = rank_genes(x);
  const std::vector<GeneIndex> top(order.begin(), order.begin() + 10);
  CHECK(aucell_score(x, top) == 1.0);
  const std::vector<GeneIndex> bottom(order.begin() + 10, order.begin() + 30);
  CHECK(aucell_score(x, bottom) == 0.0);
  CHECK_THROWS_AS(aucell_score(x, {}), ContractError);
}

TEST_CASE("aucell matches the explicit recovery curve") {
  Rng rng = make_rng({22});
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(1000);
    for (double& v : x) v = uniform01(rng) < 0.2 ? 0.0 : std::floor(10 * uniform01(rng)) / 10;
    std::vector<GeneIndex> targets;
    for (int k = 0; k < 20; ++k) targets.push_back(uniform_index(rng, 1000));
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    for (double frac : {0.05, 0.1, 0.37}) {
      CHECK(std::abs(aucell_score(x, targets, frac) - recovery_oracle(x, targets, frac)) <= 1e-12);
    }
  }
}

TEST_CASE("aucell depends on ranks only") {
  Rng rng = make_rng({23});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(150);
    for (double& v : x) v = std::abs(standard_normal(rng));
    std::vector<GeneIndex> targets;
    for (int k = 0; k < 12; ++k) targets.push_back(uniform_index(rng, 150));
    std::vector<double> y(x.size());
    std::transform(x.begin(), x.end(), y.begin(), [](double v) { return std::exp(3 * v) + std::cbrt(v); });
    const double a = aucell_score(x, targets, 0.1);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    CHECK(a == aucell_score(y, targets, 0.1));
  }
}

TEST_CASE("gmm recovers a planted bimodal mixture") {
  const auto s = mixture_draws(2000, 31);
  const GaussianMixtureModel g = fit_gmm2(s, 7);
  CHECK(std::abs(g.mean[0] - 0.2) < 0.02);
  CHECK(std::abs(g.mean[1] - 0.7) < 0.02);
  CHECK(std::abs(g.weight[0] - 0.5) < 0.05);
  CHECK(std::abs(g.weight[0] + g.weight[1] - 1.0) < 1e-9);
  CHECK(g.mean[0] <= g.mean[1]);
  CHECK(classify_distribution(g) == Modality::kBimodal);
  const ThresholdDecision d = select_threshold(g, Modality::kBimodal);
  CHECK(d.method == ThresholdMethod::kIntersection);
  CHECK(std::abs(d.threshold - 0.45) < 0.02);
  CHECK(std::abs(g.weighted_density(0, d.threshold) - g.weighted_density(1, d.threshold)) < 1e-10);
}

TEST_CASE("gmm on a single gaussian classifies skewed") {
  Rng rng = make_rng({32});
  std::vector<double> s(2000);
  for (double& v : s) v = 0.5 + 0.1 * standard_normal(rng);
  const GaussianMixtureModel g = fit_gmm2(s, 3);
  CHECK(classify_distribution(g) == Modality::kSkewed);
}

TEST_CASE("gmm log-likelihood never decreases") {
  Rng rng = make_rng({33});
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(200 + uniform_index(rng, 300));
    const double gap = uniform01(rng);
    for (double& v : s) v = (uniform01(rng) < 0.3 ? gap : 0.0) + 0.1 * standard_normal(rng) * (1 + uniform01(rng));
    const GaussianMixtureModel g = fit_gmm2(s, trial);
    REQUIRE(g.trace.size() >= 1);
    for (std::size_t i = 1; i < g.trace.size(); ++i) CHECK(g.trace[i] >= g.trace[i - 1] - 1e-9 * std::abs(g.trace[i - 1]));
    CHECK(std::abs(g.log_likelihood - mixture_log_likelihood(g, s)) < 1e-6 * std::abs(g.log_likelihood) + 1e-9);
  }
}

TEST_CASE("gmm rejects degenerate input") {
  const std::vector<double> flat(50, 0.25);
  CHECK_THROWS_AS(fit_gmm2(flat, 1), DegenerateDataError);
}

TEST_CASE("bimodality rule arithmetic") {
  CHECK(classify_distribution(make_model(0.5, 0.2, 0.05, 0.7, 0.05)) == Modality::kBimodal);
  CHECK(classify_distribution(make_model(0.95, 0.2, 0.05, 0.7, 0.05)) == Modality::kSkewed);
  CHECK(classify_distribution(make_model(0.5, 0.4, 0.05, 0.4, 0.05)) == Modality::kSkewed);
}

TEST_CASE("threshold rules") {
  const ThresholdDecision mid = select_threshold(make_model(0.5, 0.2, 0.05, 0.7, 0.05), Modality::kBimodal);
  CHECK(std::abs(mid.threshold - 0.45) < 1e-12);

  const ThresholdDecision sk = select_threshold(make_model(0.8, 0.3, 0.1, 0.9, 0.2), Modality::kSkewed);
  CHECK(sk.method == ThresholdMethod::kMuPlus2Sigma);
  CHECK(std::abs(sk.threshold - 0.5) < 1e-12);

  Rng rng = make_rng({34});
  for (int trial = 0; trial < 200; ++trial) {
    const double m1 = uniform01(rng), m2 = m1 + 0.3 + uniform01(rng);
    const auto g = make_model(0.2 + 0.6 * uniform01(rng), m1, 0.03 + 0.1 * uniform01(rng), m2,
                              0.03 + 0.1 * uniform01(rng));
    const ThresholdDecision d = select_threshold(g, Modality::kBimodal);
    CHECK(d.threshold >= m1);
    CHECK(d.threshold <= m2);
    CHECK(std::abs(g.weighted_density(0, d.threshold) - g.weighted_density(1, d.threshold)) < 1e-10);
  }
}

TEST_CASE("cell GRN derivation") {
  const Grn type(GrnScale::kCellType, "T", 6,
                 {Edge{0, 3, 0.5}, Edge{0, 4, 0.5}, Edge{1, 4, 0.25}, Edge{2, 5, 0.75}});
  const std::map<std::string, GeneIndex> tf{{"r0", 0}, {"r1", 1}, {"r2", 2}};
  const ActivityMatrix act({"c0", "c1"}, {"r0", "r1", "r2"}, {0.1, 0.2, 0.3, 0.9, 0.8, 0.7});
  const std::map<std::string, ThresholdDecision> th{
      {"r0", {Modality::kBimodal, 0.5, ThresholdMethod::kIntersection}},
      {"r1", {Modality::kBimodal, 0.5, ThresholdMethod::kIntersection}},
      {"r2", {Modality::kSkewed, 0.5, ThresholdMethod::kMuPlus2Sigma}}};
  CHECK(derive_cell_grn(type, tf, act, th, "c0").num_edges() == 0);
  CHECK(derive_cell_grn(type, tf, act, th, "c1").edges() == type.edges());
  CHECK_THROWS_AS(derive_cell_grn(type, tf, act, th, "nope"), LookupError);

  // the boundary counts as inactive
  const ActivityMatrix edge({"c"}, {"r0", "r1", "r2"}, {0.5, 0.5, 0.5});
  CHECK(derive_cell_grn(type, tf, edge, th, "c").num_edges() == 0);
}

TEST_CASE("cell GRN equals a brute-force per-regulon filter") {
  Rng rng = make_rng({35});
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Edge> edges;
    for (GeneIndex t = 0; t < 4; ++t)
      for (GeneIndex g = 4; g < 20; ++g)
        if (uniform01(rng) < 0.3) edges.push_back(Edge{t, g, 0.5});
    const Grn type(GrnScale::kCellType, "T", 20, edges);
    std::map<std::string, GeneIndex> tf;
    std::map<std::string, ThresholdDecision> th;
    std::vector<std::string> ids;
    std::vector<double> scores;
    for (GeneIndex t = 0; t < 4; ++t) {
      ids.push_back("r" + std::to_string(t));
      tf[ids.back()] = t;
      th[ids.back()] = {Modality::kSkewed, uniform01(rng), ThresholdMethod::kMuPlus2Sigma};
      scores.push_back(uniform01(rng));
    }
    const ActivityMatrix act({"c"}, ids, scores);
    const Grn cell = derive_cell_grn(type, tf, act, th, "c");
    std::vector<Edge> want;
    for (const Edge& e : edges) {
      const std::string id = "r" + std::to_string(e.source);
      if (scores[e.source] > th[id].threshold) want.push_back(e);
    }
    CHECK(cell.edges() == want);
    for (const Edge& e : cell.edges()) CHECK(type.has_edge(e.source, e.target));
  }
}

TEST_CASE("reference mapping") {
  const EmbeddingSet ref{{"a", "b", "c"}, Tensor::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}})};
  const EmbeddingSet q{{"x", "y"}, Tensor::from_rows({{0, 2, 0}, {0.1, 0.2, 5}})};
  const auto m = reference_map(q, ref);
  CHECK(m[0] == std::vector<std::size_t>{1});
  CHECK(m[1] == std::vector<std::size_t>{2});
  const EmbeddingSet zero{{"z"}, Tensor(1, 3)};
  CHECK_THROWS_AS(reference_map(zero, ref), ContractError);
}

TEST_CASE("reference mapping matches an exhaustive cosine sort") {
  Rng rng = make_rng({36});
  Tensor r = testing::random_tensor(50, 16, rng), q = testing::random_tensor(20, 16, rng);
  std::vector<std::string> rid(50), qid(20);
  const auto got = reference_map({qid, q}, {rid, r}, 3);
  for (std::size_t i = 0; i < 20; ++i) {
    std::vector<std::pair<double, std::size_t>> sims;
    for (std::size_t j = 0; j < 50; ++j) {
      double dot = 0, nq = 0, nr = 0;
      for (std::size_t k = 0; k < 16; ++k) {
        dot += q(i, k) * r(j, k);
        nq += q(i, k) * q(i, k);
        nr += r(j, k) * r(j, k);
      }
      sims.emplace_back(-dot / std::sqrt(nq * nr), j);
    }
    std::sort(sims.begin(), sims.end());
    CHECK(got[i] == std::vector<std::size_t>{sims[0].second, sims[1].second, sims[2].second});
  }
}

TEST_CASE("activity and threshold reports round-trip") {
  testing::TempDir dir("activity-io");
  const std::vector<ActivityRecord> recs{{"c1", "TF01", 0.125, 0.3, false}, {"c2", "TF01", 0.7071067811865476, 0.3, true}};
  save_activity_report(recs, dir / "a.tsv");
  const auto back = load_activity_report(dir / "a.tsv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].auc == recs[1].auc);
  CHECK(back[1].active);

  ThresholdRecord t;
  t.cell_type = "T0";
  t.regulon = "TF01";
  t.model = make_model(0.4, 0.1, 0.05, 0.6, 0.07);
  t.decision = select_threshold(t.model, Modality::kBimodal);
  const std::vector<ThresholdRecord> ts{t};
  save_threshold_report(ts, dir / "t.json");
  const auto tb = load_threshold_report(dir / "t.json");
  REQUIRE(tb.size() == 1);
  CHECK(tb[0].decision.threshold == t.decision.threshold);
  CHECK(tb[0].decision.classification == Modality::kBimodal);
  CHECK(tb[0].model.mean == t.model.mean);
}
