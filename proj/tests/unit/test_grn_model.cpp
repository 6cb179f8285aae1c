// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "grnfuse/errors.hpp"
#include "grnfuse/expression.hpp"
#include "grnfuse/grn.hpp"
#include "grnfuse/random.hpp"
#include "grnfuse/synthetic.hpp"

using namespace grnfuse;

namespace {

// genes g0..g{n-1}, the first `tfs` are TFs, all on chr1 at 10 kb spacing
GeneVocabulary line_vocab(std::size_t n, std::size_t tfs) {
  std::vector<std::string> names, tf_names;
  for (std::size_t i = 0; i < n; ++i) {
    names.push_back("g" + std::to_string(i));
    if (i < tfs) tf_names.push_back(names.back());
  }
  GeneVocabulary v(names, tf_names);
  for (std::size_t i = 0; i < n; ++i) v.set_position(i, {"chr1", static_cast<std::int64_t>(10000 * i)});
  return v;
}

double textbook_r(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

ExpressionMatrix random_expression(std::size_t cells, std::size_t genes, Rng& rng) {
  std::vector<std::string> c, g;
  for (std::size_t i = 0; i < cells; ++i) c.push_back("c" + std::to_string(i));
  for (std::size_t i = 0; i < genes; ++i) g.push_back("g" + std::to_string(i));
  std::vector<double> v(cells * genes);
  for (double& x : v) x = uniform01(rng) < 0.3 ? 0.0 : std::abs(standard_normal(rng));
  return ExpressionMatrix(c, g, v);
}

}  // namespace

TEST_CASE("vocabulary is a bijection and knows its TFs") {
  const GeneVocabulary v({"a", "b", "c"}, {"b"});
  for (GeneIndex i = 0; i < v.size(); ++i) CHECK(v.index(v.name(i)) == i);
  CHECK(v.is_tf(1));
  CHECK_FALSE(v.is_tf(0));
  CHECK(v.tf_indices() == std::vector<GeneIndex>{1});
  CHECK_THROWS_AS(v.index("zzz"), LookupError);
  CHECK_THROWS(GeneVocabulary({"a", "a"}, {}));
  CHECK_THROWS(GeneVocabulary({"a"}, {"b"}));
}

TEST_CASE("grn invariants are enforced") {
  CHECK_THROWS(Grn(GrnScale::kCell, "x", 3, {Edge{1, 1, 0.5}}));
  CHECK_THROWS(Grn(GrnScale::kCell, "x", 3, {Edge{0, 1, 0.5}, Edge{0, 1, 0.7}}));
  CHECK_THROWS(Grn(GrnScale::kCell, "x", 3, {Edge{0, 1, 0.0}}));
  CHECK_THROWS(Grn(GrnScale::kCell, "x", 3, {Edge{0, 1, 1.5}}));
  CHECK_THROWS(Grn(GrnScale::kCell, "x", 3, {Edge{0, 5, 0.5}}));
  const GeneVocabulary v({"t", "a", "b"}, {"t"});
  const Grn bad(GrnScale::kCell, "x", 3, {Edge{1, 2, 0.5}});
  CHECK_THROWS_AS(bad.check_tf_sources(v), DataError);
  const Grn ok(GrnScale::kCell, "x", 3, {Edge{0, 2, 0.5}, Edge{0, 1, 0.25}});
  CHECK_NOTHROW(ok.check_tf_sources(v));
  CHECK(ok.has_edge(0, 2));
  CHECK_FALSE(ok.has_edge(2, 0));
}

TEST_CASE("co-expression graph") {
  const std::vector<double> zero(10, 0.0);
  const auto empty = build_co_expression_graph(zero, 10);
  CHECK(empty.active.empty());
  CHECK(empty.num_pairs() == 0);

  std::vector<double> x(10, 0.0);
  x[2] = 1.0;
  x[5] = 0.5;
  x[9] = 3.0;
  const auto g = build_co_expression_graph(x, 10);
  CHECK(g.active == std::vector<GeneIndex>{2, 5, 9});
  CHECK(g.num_pairs() == 3);
  CHECK(g.contains(2, 5));
  CHECK(g.contains(9, 2));
  CHECK_FALSE(g.contains(2, 3));
  CHECK_FALSE(g.contains(2, 2));

  CHECK_THROWS_AS(build_co_expression_graph(x, 11), ShapeError);
}

TEST_CASE("co-expression pair count matches explicit enumeration") {
  Rng rng = make_rng({11});
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(40);
    for (double& v : x) v = uniform01(rng) < 0.4 ? uniform01(rng) + 0.01 : 0.0;
    const auto g = build_co_expression_graph(x, x.size());
    std::size_t pairs = 0;
    for (std::size_t u = 0; u < x.size(); ++u)
      for (std::size_t v = u + 1; v < x.size(); ++v)
        if (x[u] > 0 && x[v] > 0) {
          ++pairs;
          CHECK(g.contains(u, v));
        }
    CHECK(g.num_pairs() == pairs);

    // only the zero/non-zero pattern matters
    std::vector<double> y = x;
    for (double& v : y) v = v > 0 ? v * 7.0 + 1.0 : 0.0;
    CHECK(build_co_expression_graph(y, y.size()).active == g.active);
    CHECK(build_co_expression_graph(x, x.size()).active == g.active);
  }
}

TEST_CASE("link_eregulon window and correlation criteria") {
  const GeneVocabulary v = [] {
    GeneVocabulary v({"tf", "near", "far"}, {"tf"});
    v.set_position(0, {"chr1", 1000});
    v.set_position(1, {"chr1", 500000});
    v.set_position(2, {"chr1", 900000});
    return v;
  }();
  const std::vector<double> tf{1, 2, 3, 4, 5, 6};
  std::vector<double> vals;
  for (std::size_t c = 0; c < tf.size(); ++c) {
    vals.push_back(tf[c]);
    vals.push_back(tf[c]);
    vals.push_back(tf[c]);
  }
  const ExpressionMatrix m({"a", "b", "c", "d", "e", "f"}, {"tf", "near", "far"}, vals);
  // enhancer on top of "near"; "far" sits 200 kb beyond it
  const std::vector<GenomicRegion> enh{{"chr1", 500000, 700000}};
  const std::vector<GeneIndex> cands{1, 2};
  const ERegulon r = link_eregulon(0, enh, cands, v, m);
  REQUIRE(r.targets.size() == 1);
  CHECK(r.targets[0].first == 1);
  CHECK(r.targets[0].second == doctest::Approx(1.0).epsilon(1e-12));

  GeneVocabulary missing({"tf", "x"}, {"tf"});
  missing.set_position(0, {"chr1", 0});
  const ExpressionMatrix m2({"a", "b"}, {"tf", "x"}, {1, 2, 2, 1});
  const std::vector<GeneIndex> c2{1};
  try {
    link_eregulon(0, enh, c2, missing, m2);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }
}

TEST_CASE("link_eregulon equals an independent two-criterion filter") {
  Rng rng = make_rng({12});
  const GeneVocabulary v = line_vocab(60, 3);
  const ExpressionMatrix m = random_expression(50, 60, rng);
  std::vector<GeneIndex> cands;
  for (GeneIndex g = 3; g < 60; ++g) cands.push_back(g);
  for (GeneIndex tf = 0; tf < 3; ++tf) {
    const std::vector<GenomicRegion> enh{{"chr1", 100000 + 50000 * static_cast<std::int64_t>(tf), 120000 + 50000 * static_cast<std::int64_t>(tf)},
                                         {"chr1", 450000, 451000}};
    for (double floor : {0.0, 0.03, 0.1, 0.2}) {
      for (double kb : {20.0, 80.0, 150.0}) {
        const ERegulon r = link_eregulon(tf, enh, cands, v, m, {kb, floor});
        std::set<GeneIndex> got;
        for (const auto& [g, c] : r.targets) got.insert(g);
        std::set<GeneIndex> want;
        for (GeneIndex g : cands) {
          const double pos = 10000.0 * static_cast<double>(g);
          bool near = false;
          for (const auto& e : enh) {
            const double d = pos < e.start ? e.start - pos : (pos > e.end ? pos - e.end : 0.0);
            near = near || d <= kb * 1000.0;
          }
          if (near && std::abs(textbook_r(m.gene_column(tf), m.gene_column(g))) > floor) want.insert(g);
        }
        CHECK(got == want);
        for (const auto& [g, c] : r.targets) CHECK(std::abs(c - textbook_r(m.gene_column(tf), m.gene_column(g))) < 1e-12);
      }
    }
  }
}

TEST_CASE("link_eregulon is monotone in its thresholds") {
  Rng rng = make_rng({13});
  const GeneVocabulary v = line_vocab(40, 2);
  const ExpressionMatrix m = random_expression(30, 40, rng);
  std::vector<GeneIndex> cands;
  for (GeneIndex g = 2; g < 40; ++g) cands.push_back(g);
  const std::vector<GenomicRegion> enh{{"chr1", 150000, 160000}};
  auto targets = [&](double kb, double floor) {
    std::set<GeneIndex> s;
    for (const auto& [g, r] : link_eregulon(0, enh, cands, v, m, {kb, floor}).targets) s.insert(g);
    return s;
  };
  const auto base = targets(60.0, 0.15);
  for (const auto& wider : {targets(60.0, 0.05), targets(120.0, 0.15), targets(120.0, 0.0)}) {
    CHECK(std::includes(wider.begin(), wider.end(), base.begin(), base.end()));
  }
}

TEST_CASE("grn_from_eregulons") {
  const GeneVocabulary v({"t1", "t2", "a", "b", "c"}, {"t1", "t2"});
  const ERegulon one{0, {}, {{2, 0.5}, {3, -0.2}, {4, 0.9}}};
  const Grn g = grn_from_eregulons(std::span(&one, 1), GrnScale::kCellType, "T", v);
  CHECK(g.num_edges() == 3);
  for (const Edge& e : g.edges()) CHECK(e.source == 0);

  const std::vector<ERegulon> two{{0, {}, {{2, 0.1}}}, {0, {}, {{2, 0.4}}}};
  const Grn merged = grn_from_eregulons(two, GrnScale::kCellType, "T", v);
  REQUIRE(merged.num_edges() == 1);
  CHECK(merged.edges()[0].weight == 0.4);

  CHECK(grn_from_eregulons({}, GrnScale::kCell, "empty", v).num_edges() == 0);
}

TEST_CASE("grn_from_eregulons equals a brute-force union with max") {
  Rng rng = make_rng({14});
  const GeneVocabulary v = line_vocab(30, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ERegulon> regs;
    std::map<std::pair<GeneIndex, GeneIndex>, double> want;
    for (int k = 0; k < 6; ++k) {
      ERegulon r{uniform_index(rng, 5), {}, {}};
      for (int t = 0; t < 8; ++t) {
        const GeneIndex g = 5 + uniform_index(rng, 25);
        const double c = (uniform01(rng) * 1.8 - 0.9);
        if (c == 0.0) continue;
        r.targets.emplace_back(g, c);
        double& w = want[{r.tf, g}];
        w = std::max(w, std::abs(c));
      }
      regs.push_back(r);
    }
    const Grn g = grn_from_eregulons(regs, GrnScale::kCellType, "x", v);
    std::map<std::pair<GeneIndex, GeneIndex>, double> got;
    for (const Edge& e : g.edges()) got[{e.source, e.target}] = e.weight;
    CHECK(got == want);
    for (const Edge& e : g.edges()) CHECK(v.is_tf(e.source));
  }
}

TEST_CASE("degree statistics") {
  const std::size_t G = 12;
  const GeneVocabulary v = line_vocab(G, 1);
  std::vector<Edge> star;
  for (GeneIndex t = 1; t <= 10; ++t) star.push_back(Edge{0, t, 1.0});
  const DegreeStats s = degree_stats(Grn(GrnScale::kCellType, "s", G, star), v);
  CHECK(s.tf_mean_out_degree == 10.0);
  CHECK(s.non_tf_mean_degree == 10.0 / static_cast<double>(G - 1));
  CHECK(s.zero_edge_fraction == 1.0 / static_cast<double>(G));

  const DegreeStats e = degree_stats(Grn(GrnScale::kCellType, "e", G, {}), v);
  CHECK(e.zero_edge_fraction == 1.0);
}

TEST_CASE("planted synthetic GRNs are TF-hub dominated") {
  SyntheticConfig cfg;
  cfg.cells = 40;
  cfg.perturb_controls_per_type = 1;
  const SyntheticDataset d = gen_synthetic(cfg);
  for (const Grn& g : d.planted) {
    const DegreeStats s = degree_stats(g, d.vocab);
    CHECK(s.tf_mean_out_degree / s.non_tf_mean_degree > 5.0);
    CHECK_NOTHROW(g.check_tf_sources(d.vocab));
  }
}

TEST_CASE("edge-list and coordinate files round-trip") {
  testing::TempDir dir("grn-io");
  const GeneVocabulary v = line_vocab(6, 2);
  const std::vector<Grn> grns{Grn(GrnScale::kCellType, "A", 6, {Edge{0, 3, 0.125}, Edge{1, 4, 0.3333333333333333}}),
                              Grn(GrnScale::kCell, "cell7", 6, {Edge{0, 5, 1.0}})};
  save_edge_list(grns, v, dir / "e.tsv");
  const auto back = load_edge_list(dir / "e.tsv", v);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].owner() == grns[i].owner());
    CHECK(back[i].scale() == grns[i].scale());
    CHECK(back[i].edges() == grns[i].edges());
  }
  save_coordinates(v, dir / "c.tsv");
  GeneVocabulary w({"g0", "g1", "g2", "g3", "g4", "g5"}, {"g0", "g1"});
  load_coordinates(w, dir / "c.tsv");
  for (GeneIndex g = 0; g < 6; ++g) CHECK(w.position(g) == v.position(g));
}
