// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "grnfuse/backbone.hpp"
#include "grnfuse/errors.hpp"

using namespace grnfuse;
using grnfuse::testing::random_tensor;

namespace {

BackboneConfig small_config(std::size_t layers = 2) {
  BackboneConfig c;
  c.hidden = 16;
  c.layers = layers;
  c.heads = 2;
  c.feed_forward = 24;
  return c;
}

TokenSequence random_tokens(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<GeneIndex> genes(vocab);
  for (GeneIndex g = 0; g < vocab; ++g) genes[g] = g;
  TokenSequence t;
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(genes[i], genes[i + uniform_index(rng, vocab - i)]);
    t.push_back(Token{genes[i], 0.1 + 2.0 * uniform01(rng)});
  }
  return t;
}

}  // namespace

TEST_CASE("tokenize_cell") {
  const BackboneConfig c = small_config();
  CHECK(tokenize_cell(std::vector<double>(10, 0.0), c).empty());

  std::vector<double> x(10, 0.0);
  x[3] = 0.5;
  x[1] = 2.0;
  x[8] = 1.0;
  const auto t = tokenize_cell(x, c);
  REQUIRE(t.size() == 3);
  CHECK(t[0] == Token{1, 2.0});
  CHECK(t[1] == Token{8, 1.0});
  CHECK(t[2] == Token{3, 0.5});

  std::vector<double> tie(10, 0.0);
  tie[7] = 5;
  tie[2] = 5;
  tie[9] = 1;
  const auto tt = tokenize_cell(tie, c);
  CHECK(tt[0].gene == 2);
  CHECK(tt[1].gene == 7);
  CHECK(tt[2].gene == 9);

  BackboneConfig capped = c;
  capped.max_genes = 2;
  CHECK(tokenize_cell(x, capped).size() == 2);
}

TEST_CASE("apply_mask counts and determinism") {
  Rng rng = make_rng({61});
  const TokenSequence t = random_tokens(10, 30, rng);
  Rng r1 = make_rng({5}), r2 = make_rng({5});
  const auto [m1, s1] = apply_mask(t, 0.3, r1);
  const auto [m2, s2] = apply_mask(t, 0.3, r2);
  CHECK(s1.positions.size() == 3);
  CHECK(s1.positions == s2.positions);
  CHECK(m1 == m2);
  for (std::size_t i = 0; i < s1.positions.size(); ++i) {
    CHECK(m1[s1.positions[i]].value == kMaskSentinel);
    CHECK(s1.originals[i] == t[s1.positions[i]].value);
    if (i > 0) CHECK(s1.positions[i] > s1.positions[i - 1]);
  }
  std::size_t changed = 0;
  for (std::size_t i = 0; i < t.size(); ++i) changed += m1[i].value != t[i].value;
  CHECK(changed == 3);

  Rng r3 = make_rng({6});
  CHECK(apply_mask(t, 0.95, r3).second.positions.size() == 10);
  Rng r4 = make_rng({7});
  CHECK_THROWS_AS(apply_mask({}, 0.2, r4), ContractError);

  for (std::size_t n = 1; n < 40; ++n) {
    Rng r = make_rng({8, n});
    const auto spec = apply_mask(random_tokens(n, 50, rng), 0.15, r).second;
    CHECK(spec.positions.size() == std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.15 * n - 1e-9))));
  }
}

TEST_CASE("encoder with no layers returns the embeddings") {
  Rng rng = make_rng({62});
  BackboneParams p = BackboneParams::init(20, small_config(0), rng);
  const TokenSequence t = random_tokens(5, 20, rng);
  Tape tape;
  const Var out = encoder_forward(tape, t, p);
  const Var emb = embed_tokens(t, tape.parameter(p.gene_embedding), p);
  CHECK(out.value() == emb.value());
}

TEST_CASE("encoder is permutation-equivariant") {
  Rng rng = make_rng({63});
  BackboneParams p = BackboneParams::init(30, small_config(), rng);
  const TokenSequence t = random_tokens(8, 30, rng);
  const std::vector<std::size_t> perm{3, 0, 7, 1, 6, 2, 5, 4};
  TokenSequence u;
  for (std::size_t i : perm) u.push_back(t[i]);
  Tape a, b;
  const Tensor ha = encoder_forward(a, t, p).value();
  const Tensor hb = encoder_forward(b, u, p).value();
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t c = 0; c < ha.cols(); ++c) CHECK(std::abs(hb(i, c) - ha(perm[i], c)) <= 1e-12);
}

TEST_CASE("encoder gradient check, 8 tokens, d=16") {
  Rng rng = make_rng({64});
  BackboneParams p = BackboneParams::init(12, small_config(), rng);
  DecoderParams dec = DecoderParams::init(16, rng);
  TokenSequence t = random_tokens(8, 12, rng);
  Rng mr = make_rng({1});
  const auto [masked, spec] = apply_mask(t, 0.3, mr);
  std::vector<Parameter*> params = p.parameters();
  for (Parameter* q : dec.parameters()) params.push_back(q);
  const auto res = testing::gradcheck(params, [&](Tape& tape) {
    return masked_mse_loss(decoder_forward(encoder_forward(tape, masked, p), dec), spec);
  });
  INFO(res.worst);
  CHECK(res.max_relative_error < 1e-4);
}

TEST_CASE("encoder rejects mismatched feature width") {
  Rng rng = make_rng({65});
  BackboneParams p = BackboneParams::init(12, small_config(), rng);
  Tape tape;
  CHECK_THROWS_AS(encoder_forward(random_tokens(3, 12, rng), tape.constant(Tensor(12, 8)), p), ShapeError);
}

TEST_CASE("decoder head") {
  Rng rng = make_rng({66});
  DecoderParams d = DecoderParams::init(4, rng);
  d.weight.value.fill(0.0);
  Tape t1;
  const Tensor h = random_tensor(5, 4, rng);
  for (double v : decoder_forward(t1.constant(h), d).value().values()) CHECK(v == 0.0);

  DecoderParams one{Parameter("w", Tensor::scalar(1.0)), Parameter("b", Tensor::scalar(0.0))};
  Tape t2;
  const Tensor col = random_tensor(6, 1, rng);
  CHECK(decoder_forward(t2.constant(col), one).value() == col);

  DecoderParams r = DecoderParams::init(4, rng);
  r.bias.value(0, 0) = 0.3;
  Tape t3;
  const Tensor got = decoder_forward(t3.constant(h), r).value();
  for (std::size_t i = 0; i < 5; ++i) {
    double s = r.bias.value(0, 0);
    for (std::size_t k = 0; k < 4; ++k) s += h(i, k) * r.weight.value(k, 0);
    CHECK(std::abs(got(i, 0) - s) <= 1e-12);
  }
}

TEST_CASE("masked MSE") {
  MaskSpec spec{{1, 3}, {2.0, -1.0}};
  Tape t1;
  CHECK(masked_mse_loss(t1.constant(Tensor::from_rows({{9}, {2}, {9}, {-1}})), spec).value().item() == 0.0);
  MaskSpec one{{0}, {1.0}};
  Tape t2;
  CHECK(masked_mse_loss(t2.constant(Tensor::from_rows({{3}, {5}})), one).value().item() == 4.0);
  Tape t3;
  CHECK_THROWS_AS(masked_mse_loss(t3.constant(Tensor(2, 1)), MaskSpec{}), ContractError);

  Rng rng = make_rng({67});
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor pred = random_tensor(10, 1, rng);
    MaskSpec s;
    for (std::size_t i = 0; i < 10; ++i)
      if (uniform01(rng) < 0.4 || i == 9) {
        s.positions.push_back(i);
        s.originals.push_back(standard_normal(rng));
      }
    double want = 0.0;
    for (std::size_t k = 0; k < s.positions.size(); ++k) {
      const double e = pred[s.positions[k]] - s.originals[k];
      want += e * e;
    }
    want /= static_cast<double>(s.positions.size());
    Parameter p("p", pred);
    {
      Tape t;
      const Var loss = masked_mse_loss(t.parameter(p), s);
      CHECK(std::abs(loss.value().item() - want) <= 1e-12);
      t.backward(loss);
    }
    for (std::size_t i = 0; i < 10; ++i) {
      const bool masked = std::find(s.positions.begin(), s.positions.end(), i) != s.positions.end();
      if (!masked) CHECK(p.grad[i] == 0.0);
    }
  }
}
