// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "grnfuse/errors.hpp"
#include "grnfuse/fusion.hpp"
#include "grnfuse/graph_encoder.hpp"

using namespace grnfuse;
using grnfuse::testing::random_tensor;

namespace {

std::vector<GeneIndex> iota_genes(std::size_t n) {
  std::vector<GeneIndex> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = 10 + 3 * i;
  return g;
}

Tensor loop_product(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

// QK^T / sqrt(d_h), softmax, times V, per head; concatenated and projected.
Tensor attention_oracle(const Tensor& x, const Tensor& s, const AttentionWeights& w, std::size_t heads,
                        std::vector<Tensor>& probs) {
  const Tensor q = loop_product(x, w.query.value), k = loop_product(s, w.key.value),
               v = loop_product(s, w.value.value);
  const std::size_t d = q.cols(), dh = d / heads, n = x.rows(), m = s.rows();
  Tensor merged(n, d);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor a(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -1e300;
      for (std::size_t j = 0; j < m; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < dh; ++c) dot += q(i, h * dh + c) * k(j, h * dh + c);
        a(i, j) = dot / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, a(i, j));
      }
      double z = 0.0;
      for (std::size_t j = 0; j < m; ++j) z += (a(i, j) = std::exp(a(i, j) - mx));
      for (std::size_t j = 0; j < m; ++j) a(i, j) /= z;
      for (std::size_t c = 0; c < dh; ++c)
        for (std::size_t j = 0; j < m; ++j) merged(i, h * dh + c) += a(i, j) * v(j, h * dh + c);
    }
    probs.push_back(a);
  }
  return loop_product(merged, w.output.value);
}

}  // namespace

TEST_CASE("cross-attention matches a from-definition oracle") {
  Rng rng = make_rng({71});
  for (int trial = 0; trial < 10; ++trial) {
    CrossAttentionParams p = CrossAttentionParams::init(8, 2, rng);
    const Tensor x = random_tensor(6, 8, rng), s = random_tensor(6, 8, rng);
    const auto genes = iota_genes(6);
    Tape tape;
    const FusionOutput out = cross_attention(tape.constant(x), genes, tape.constant(s), genes, p, true);
    std::vector<Tensor> probs;
    const Tensor want = attention_oracle(x, s, p.weights, 2, probs);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(out.h_fusion.value()[i] - want[i]) <= 1e-12);
    REQUIRE(out.attention.size() == 2);
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t i = 0; i < probs[h].size(); ++i) CHECK(std::abs(out.attention[h][i] - probs[h][i]) <= 1e-12);
      for (std::size_t r = 0; r < 6; ++r) {
        double sum = 0.0;
        for (double v : out.attention[h].row(r)) {
          CHECK(v >= 0.0);
          sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("cross-attention over one gene") {
  Rng rng = make_rng({72});
  CrossAttentionParams p = CrossAttentionParams::init(4, 4, rng);
  const Tensor x = random_tensor(1, 4, rng), s = random_tensor(1, 4, rng);
  const std::vector<GeneIndex> g{5};
  Tape tape;
  const FusionOutput out = cross_attention(tape.constant(x), g, tape.constant(s), g, p, true);
  REQUIRE(out.attention.size() == 4);
  for (const Tensor& a : out.attention) CHECK(a == Tensor::scalar(1.0));
  const Tensor want = loop_product(loop_product(s, p.weights.value.value), p.weights.output.value);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(out.h_fusion.value()[i] - want[i]) <= 1e-12);
}

TEST_CASE("identical structural rows give uniform attention") {
  Rng rng = make_rng({73});
  CrossAttentionParams p = CrossAttentionParams::init(8, 4, rng);
  const Tensor row = random_tensor(1, 8, rng);
  Tensor s(5, 8);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 8; ++c) s(r, c) = row(0, c);
  const auto genes = iota_genes(5);
  Tape tape;
  const auto out = cross_attention(tape.constant(random_tensor(5, 8, rng)), genes, tape.constant(s), genes, p, true);
  for (const Tensor& a : out.attention)
    for (double v : a.values()) CHECK(std::abs(v - 0.2) <= 1e-12);
}

TEST_CASE("attention matrices only on request") {
  Rng rng = make_rng({74});
  CrossAttentionParams p = CrossAttentionParams::init(4, 2, rng);
  const auto genes = iota_genes(3);
  Tape tape;
  const auto out = cross_attention(tape.constant(random_tensor(3, 4, rng)), genes,
                                   tape.constant(random_tensor(3, 4, rng)), genes, p, false);
  CHECK(out.attention.empty());
}

TEST_CASE("misaligned genes are reported") {
  Rng rng = make_rng({75});
  CrossAttentionParams p = CrossAttentionParams::init(4, 2, rng);
  const std::vector<GeneIndex> a{1, 2, 3}, b{1, 7, 3};
  Tape tape;
  try {
    cross_attention(tape.constant(Tensor(3, 4)), a, tape.constant(Tensor(3, 4)), b, p);
    FAIL("expected AlignmentError");
  } catch (const AlignmentError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 1: 2 vs 7") != std::string::npos);
    CHECK(msg.find("row 0") == std::string::npos);
  }
}

TEST_CASE("combine") {
  Rng rng = make_rng({76});
  const Tensor e = random_tensor(4, 6, rng), f = random_tensor(4, 6, rng);
  Tape tape;
  const Var ve = tape.constant(e), vf = tape.constant(f);
  CHECK(combine(ve, vf, 0.0).value() == e);
  Tensor neg = e;
  for (double& v : neg.values()) v = -v;
  for (double v : combine(ve, tape.constant(neg), 1.0).value().values()) CHECK(v == 0.0);
  const Tensor mixed = combine(ve, vf, 0.7).value();
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(mixed[i] == e[i] + 0.7 * f[i]);
  CHECK_THROWS_AS(combine(ve, tape.constant(Tensor(4, 5)), 1.0), ShapeError);
}

TEST_CASE("beta zero cuts every structural gradient") {
  Rng rng = make_rng({77});
  const Grn g(GrnScale::kCell, "g", 6, {Edge{0, 1, 1}, Edge{0, 2, 1}, Edge{3, 4, 1}});
  SageParams sage = SageParams::init(8, SageConfig{2, 4, false, Activation::kRelu}, rng);
  CrossAttentionParams p = CrossAttentionParams::init(8, 2, rng);
  Parameter expr("expr", random_tensor(4, 8, rng));
  const std::vector<GeneIndex> genes{0, 1, 2, 4};
  Tape tape;
  const Tensor x = random_tensor(6, 8, rng);
  const Var h_struct = gather_rows(sage_forward(g, tape.constant(x), sage, rng).values, genes);
  const Var h_expr = tape.parameter(expr);
  const FusionOutput f = cross_attention(h_expr, genes, h_struct, genes, p);
  const Var c = combine(h_expr, f.h_fusion, 0.0);
  tape.backward(sum(mul(c, c)));
  for (Parameter* q : sage.parameters())
    for (double v : q->grad.values()) CHECK(v == 0.0);
  for (Parameter* q : p.parameters())
    for (double v : q->grad.values()) CHECK(v == 0.0);
  for (std::size_t i = 0; i < expr.grad.size(); ++i) CHECK(expr.grad[i] == 2.0 * expr.value[i]);
}

TEST_CASE("cross-attention gradients pass finite differences") {
  Rng rng = make_rng({78});
  for (std::size_t n : {1u, 5u, 8u}) {
    CrossAttentionParams p = CrossAttentionParams::init(16, 4, rng);
    Parameter hx("h_expr", random_tensor(n, 16, rng)), hs("h_struct", random_tensor(n, 16, rng));
    const auto genes = iota_genes(n);
    std::vector<Parameter*> params = p.parameters();
    params.push_back(&hx);
    params.push_back(&hs);
    const Tensor target = random_tensor(n, 16, rng);
    const auto res = testing::gradcheck(params, [&](Tape& t) {
      const Var ex = t.parameter(hx);
      const Var d = combine(ex, cross_attention(ex, genes, t.parameter(hs), genes, p).h_fusion, 1.0) -
                    t.constant(target);
      return mean(mul(d, d));
    });
    INFO(n, " ", res.worst);
    CHECK(res.max_relative_error < 1e-4);
  }
}
