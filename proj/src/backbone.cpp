// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "grnfuse/activity.hpp"
#include "grnfuse/errors.hpp"

namespace grnfuse {

void BackboneConfig::validate() const {
  if (hidden == 0 || heads == 0 || hidden % heads != 0) {
    throw ContractError("backbone hidden width must be a positive multiple of the head count");
  }
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw ContractError("mask ratio must lie in (0, 1)");
  if (max_genes == 0 || feed_forward == 0) throw ContractError("max_genes and feed_forward must be positive");
}

TokenSequence tokenize_cell(std::span<const double> cell_expression, const BackboneConfig& config) {
  TokenSequence tokens;
  for (GeneIndex g : rank_genes(cell_expression)) {
    if (!(cell_expression[g] > 0.0) || tokens.size() == config.max_genes) break;
    tokens.push_back(Token{g, cell_expression[g]});
  }
  return tokens;
}

std::pair<TokenSequence, MaskSpec> apply_mask(const TokenSequence& tokens, double mask_ratio, Rng& rng) {
  if (tokens.empty()) throw ContractError("apply_mask: empty token sequence");
  if (!(mask_ratio > 0.0 && mask_ratio <= 1.0)) throw ContractError("apply_mask: ratio must lie in (0, 1]");
  const std::size_t n = tokens.size();
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(mask_ratio * static_cast<double>(n) - 1e-9)), 1, n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < count; ++i) std::swap(order[i], order[i + uniform_index(rng, n - i)]);
  order.resize(count);
  std::sort(order.begin(), order.end());

  TokenSequence masked = tokens;
  MaskSpec spec;
  spec.positions = order;
  for (std::size_t p : order) {
    spec.originals.push_back(tokens[p].value);
    masked[p].value = kMaskSentinel;
  }
  return {std::move(masked), std::move(spec)};
}

std::vector<Parameter*> TransformerBlock::parameters() {
  std::vector<Parameter*> out{&norm1_gain, &norm1_bias};
  for (Parameter* p : attention.parameters()) out.push_back(p);
  for (Parameter* p : {&norm2_gain, &norm2_bias, &ff_in, &ff_in_bias, &ff_out, &ff_out_bias}) out.push_back(p);
  return out;
}

BackboneParams BackboneParams::init(std::size_t vocabulary_size, const BackboneConfig& config, Rng& rng) {
  config.validate();
  const std::size_t d = config.hidden;
  BackboneParams p;
  p.config = config;
  Tensor table(vocabulary_size, d);
  for (double& v : table.values()) v = standard_normal(rng);
  p.gene_embedding = Parameter("backbone.gene_embedding", std::move(table));
  p.value_in = Parameter("backbone.value_in", xavier(1, d, rng));
  p.value_in_bias = Parameter("backbone.value_in_bias", Tensor(1, d));
  p.value_out = Parameter("backbone.value_out", xavier(d, d, rng));
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string prefix = "backbone.block" + std::to_string(l);
    TransformerBlock b{
        Parameter(prefix + ".norm1_gain", Tensor(1, d, 1.0)),
        Parameter(prefix + ".norm1_bias", Tensor(1, d)),
        AttentionWeights::init(prefix + ".attn", d, rng),
        Parameter(prefix + ".norm2_gain", Tensor(1, d, 1.0)),
        Parameter(prefix + ".norm2_bias", Tensor(1, d)),
        Parameter(prefix + ".ff_in", xavier(d, config.feed_forward, rng)),
        Parameter(prefix + ".ff_in_bias", Tensor(1, config.feed_forward)),
        Parameter(prefix + ".ff_out", xavier(config.feed_forward, d, rng)),
        Parameter(prefix + ".ff_out_bias", Tensor(1, d)),
    };
    p.blocks.push_back(std::move(b));
  }
  return p;
}

std::vector<Parameter*> BackboneParams::parameters() {
  std::vector<Parameter*> out{&gene_embedding, &value_in, &value_in_bias, &value_out};
  for (auto& b : blocks) {
    for (Parameter* p : b.parameters()) out.push_back(p);
  }
  return out;
}

DecoderParams DecoderParams::init(std::size_t width, Rng& rng) {
  return DecoderParams{Parameter("decoder.weight", xavier(width, 1, rng)), Parameter("decoder.bias", Tensor(1, 1))};
}

std::vector<Parameter*> DecoderParams::parameters() { return {&weight, &bias}; }

Var embed_tokens(const TokenSequence& tokens, Var gene_features, BackboneParams& params) {
  if (tokens.empty()) throw ContractError("cannot embed an empty token sequence");
  if (gene_features.cols() != params.config.hidden) {
    throw ShapeError("gene features " + shape_string(gene_features.value()) + " for hidden width " +
                     std::to_string(params.config.hidden));
  }
  Tape& tape = gene_features.tape();
  std::vector<GeneIndex> genes;
  std::vector<double> values;
  for (const Token& t : tokens) {
    genes.push_back(t.gene);
    values.push_back(t.value);
  }
  const Var identity = gather_rows(gene_features, genes);
  const Var raw = tape.constant(Tensor::column(values));
  const Var hidden =
      relu(add_row(matmul(raw, tape.parameter(params.value_in)), tape.parameter(params.value_in_bias)));
  return identity + matmul(hidden, tape.parameter(params.value_out));
}

Var encoder_forward(const TokenSequence& tokens, Var gene_features, BackboneParams& params) {
  Tape& tape = gene_features.tape();
  Var x = embed_tokens(tokens, gene_features, params);
  for (TransformerBlock& b : params.blocks) {
    const Var n1 = layer_norm_rows(x, tape.parameter(b.norm1_gain), tape.parameter(b.norm1_bias));
    x = x + multi_head_attention(n1, n1, b.attention, params.config.heads);
    const Var n2 = layer_norm_rows(x, tape.parameter(b.norm2_gain), tape.parameter(b.norm2_bias));
    const Var inner = relu(add_row(matmul(n2, tape.parameter(b.ff_in)), tape.parameter(b.ff_in_bias)));
    x = x + add_row(matmul(inner, tape.parameter(b.ff_out)), tape.parameter(b.ff_out_bias));
  }
  return x;
}

Var encoder_forward(Tape& tape, const TokenSequence& tokens, BackboneParams& params) {
  return encoder_forward(tokens, tape.parameter(params.gene_embedding), params);
}

Var decoder_forward(Var h_combined, DecoderParams& params) {
  Tape& tape = h_combined.tape();
  return add_row(matmul(h_combined, tape.parameter(params.weight)), tape.parameter(params.bias));
}

Var masked_mse_loss(Var predictions, const MaskSpec& mask) {
  if (mask.positions.empty()) throw ContractError("masked_mse_loss: empty mask");
  if (mask.positions.size() != mask.originals.size()) throw ContractError("masked_mse_loss: malformed mask");
  if (predictions.cols() != 1) throw ShapeError("masked_mse_loss expects [n x 1] predictions");
  Tape& tape = predictions.tape();
  const Var picked = gather_rows(predictions, mask.positions);
  const Var diff = picked - tape.constant(Tensor::column(mask.originals));
  return scale(sum(mul(diff, diff)), 1.0 / static_cast<double>(mask.positions.size()));
}

}  // namespace grnfuse
