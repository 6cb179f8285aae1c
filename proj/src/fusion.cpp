// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/fusion.hpp"

#include <algorithm>

#include "grnfuse/errors.hpp"

namespace grnfuse {

CrossAttentionParams CrossAttentionParams::init(std::size_t width, std::size_t heads, Rng& rng) {
  if (heads == 0 || width % heads != 0) throw ContractError("cross-attention width must divide into heads");
  return CrossAttentionParams{heads, AttentionWeights::init("fusion.cross", width, rng)};
}

FusionOutput cross_attention(Var h_expr, std::span<const GeneIndex> expr_genes, Var h_struct,
                             std::span<const GeneIndex> struct_genes, CrossAttentionParams& params,
                             bool return_attention) {
  if (expr_genes.size() != h_expr.rows() || struct_genes.size() != h_struct.rows()) {
    throw ShapeError("cross_attention: gene lists do not match embedding rows");
  }
  if (!std::equal(expr_genes.begin(), expr_genes.end(), struct_genes.begin(), struct_genes.end())) {
    std::string offending;
    const std::size_t n = std::max(expr_genes.size(), struct_genes.size());
    for (std::size_t i = 0; i < n; ++i) {
      const bool in_a = i < expr_genes.size();
      const bool in_b = i < struct_genes.size();
      if (in_a && in_b && expr_genes[i] == struct_genes[i]) continue;
      if (!offending.empty()) offending += ", ";
      offending += "row " + std::to_string(i) + ": " + (in_a ? std::to_string(expr_genes[i]) : "-") + " vs " +
                   (in_b ? std::to_string(struct_genes[i]) : "-");
    }
    throw AlignmentError("cross_attention: misaligned genes (" + offending + ")");
  }
  FusionOutput out;
  out.h_fusion = multi_head_attention(h_expr, h_struct, params.weights, params.heads,
                                      return_attention ? &out.attention : nullptr);
  return out;
}

Var combine(Var h_expr, Var h_fusion, double beta) {
  if (!h_expr.value().same_shape(h_fusion.value())) {
    throw ShapeError("combine: " + shape_string(h_expr.value()) + " vs " + shape_string(h_fusion.value()));
  }
  return add(h_expr, scale(h_fusion, beta));
}

}  // namespace grnfuse
