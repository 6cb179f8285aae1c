// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "grnfuse/autodiff.hpp"
#include "grnfuse/random.hpp"

namespace grnfuse {

// Projection weights of one multi-head attention layer, all [d x d].
struct AttentionWeights {
  Parameter query;
  Parameter key;
  Parameter value;
  Parameter output;

  static AttentionWeights init(const std::string& prefix, std::size_t width, Rng& rng);
  std::vector<Parameter*> parameters();
};

// Scaled dot-product attention with queries from `query_source` and keys and
// values from `memory`, split into `heads` heads of width d / heads, scaled by
// 1 / sqrt(d / heads), concatenated and output-projected. When `attention` is
// non-null it receives one row-stochastic [n_query x n_memory] matrix per head.
Var multi_head_attention(Var query_source, Var memory, AttentionWeights& weights, std::size_t heads,
                         std::vector<Tensor>* attention = nullptr);

// Xavier-normal initialisation.
Tensor xavier(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace grnfuse
