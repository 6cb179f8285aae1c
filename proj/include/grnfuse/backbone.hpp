// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Toy masked-expression transformer. A cell is a set of (gene, value) tokens;
// there is no positional encoding, so the encoder is permutation-equivariant.

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "grnfuse/attention.hpp"
#include "grnfuse/autodiff.hpp"
#include "grnfuse/grn.hpp"
#include "grnfuse/random.hpp"

namespace grnfuse {

struct BackboneConfig {
  std::size_t hidden = 64;  // d
  std::size_t layers = 2;   // L
  std::size_t heads = 4;
  std::size_t feed_forward = 128;
  double mask_ratio = 0.15;
  std::size_t max_genes = 256;

  void validate() const;  // ContractError when inconsistent
};

// Value given to masked tokens; real expression is never negative.
inline constexpr double kMaskSentinel = -1.0;

struct Token {
  GeneIndex gene = 0;
  double value = 0.0;

  bool operator==(const Token&) const = default;
};

using TokenSequence = std::vector<Token>;

struct MaskSpec {
  std::vector<std::size_t> positions;  // ascending token positions
  std::vector<double> originals;       // value at each masked position
};

// Non-zero genes by descending expression (ties: ascending gene index),
// truncated to config.max_genes.
TokenSequence tokenize_cell(std::span<const double> cell_expression, const BackboneConfig& config);

// Masks ceil(ratio * n) uniformly chosen positions.
std::pair<TokenSequence, MaskSpec> apply_mask(const TokenSequence& tokens, double mask_ratio, Rng& rng);

struct TransformerBlock {
  Parameter norm1_gain, norm1_bias;
  AttentionWeights attention;
  Parameter norm2_gain, norm2_bias;
  Parameter ff_in, ff_in_bias, ff_out, ff_out_bias;

  std::vector<Parameter*> parameters();
};

struct BackboneParams {
  BackboneConfig config;
  Parameter gene_embedding;  // [G x d], shared with the graph encoder input
  Parameter value_in, value_in_bias, value_out;  // scalar -> d projection
  std::vector<TransformerBlock> blocks;

  static BackboneParams init(std::size_t vocabulary_size, const BackboneConfig& config, Rng& rng);
  std::vector<Parameter*> parameters();
};

struct DecoderParams {
  Parameter weight;  // [d x 1]
  Parameter bias;    // [1 x 1]

  static DecoderParams init(std::size_t width, Rng& rng);
  std::vector<Parameter*> parameters();
};

// Per-token input: gene-identity row of `gene_features` plus the projected
// expression value.
Var embed_tokens(const TokenSequence& tokens, Var gene_features, BackboneParams& params);

// Runs the L pre-norm blocks over the token embeddings; h_expr is [n x d].
Var encoder_forward(const TokenSequence& tokens, Var gene_features, BackboneParams& params);
Var encoder_forward(Tape& tape, const TokenSequence& tokens, BackboneParams& params);

// One prediction per token row: [n x d] -> [n x 1].
Var decoder_forward(Var h_combined, DecoderParams& params);

// Mean squared error over the masked positions only.
Var masked_mse_loss(Var predictions, const MaskSpec& mask);

}  // namespace grnfuse
