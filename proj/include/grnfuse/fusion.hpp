// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "grnfuse/attention.hpp"
#include "grnfuse/autodiff.hpp"
#include "grnfuse/grn.hpp"

namespace grnfuse {

struct CrossAttentionParams {
  std::size_t heads = 4;
  AttentionWeights weights;

  static CrossAttentionParams init(std::size_t width, std::size_t heads, Rng& rng);
  std::size_t width() const { return weights.query.value.rows(); }
  std::vector<Parameter*> parameters() { return weights.parameters(); }
};

struct FusionOutput {
  Var h_fusion;
  std::vector<Tensor> attention;  // one [N x N] matrix per head, when requested
};

// Queries come from the expression rows, keys and values from the structural
// rows. Row i of both inputs must describe the same gene.
FusionOutput cross_attention(Var h_expr, std::span<const GeneIndex> expr_genes, Var h_struct,
                             std::span<const GeneIndex> struct_genes, CrossAttentionParams& params,
                             bool return_attention = false);

Var combine(Var h_expr, Var h_fusion, double beta = 1.0);

}  // namespace grnfuse
