// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/attention.hpp"

#include <cmath>

#include "grnfuse/errors.hpp"

namespace grnfuse {

Tensor xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(rows + cols));
  Tensor t(rows, cols);
  for (double& v : t.values()) v = stddev * standard_normal(rng);
  return t;
}

AttentionWeights AttentionWeights::init(const std::string& prefix, std::size_t width, Rng& rng) {
  return AttentionWeights{Parameter(prefix + ".wq", xavier(width, width, rng)),
                          Parameter(prefix + ".wk", xavier(width, width, rng)),
                          Parameter(prefix + ".wv", xavier(width, width, rng)),
                          Parameter(prefix + ".wo", xavier(width, width, rng))};
}

std::vector<Parameter*> AttentionWeights::parameters() { return {&query, &key, &value, &output}; }

Var multi_head_attention(Var query_source, Var memory, AttentionWeights& weights, std::size_t heads,
                         std::vector<Tensor>* attention) {
  const std::size_t d = weights.query.value.rows();
  if (heads == 0 || d % heads != 0) {
    throw ContractError("attention width " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                        " heads");
  }
  if (query_source.cols() != d || memory.cols() != d) {
    throw ShapeError("attention inputs " + shape_string(query_source.value()) + " and " +
                     shape_string(memory.value()) + " for width " + std::to_string(d));
  }
  Tape& tape = query_source.tape();
  const Var q = matmul(query_source, tape.parameter(weights.query));
  const Var k = matmul(memory, tape.parameter(weights.key));
  const Var v = matmul(memory, tape.parameter(weights.value));
  const std::size_t head_width = d / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(head_width));
  if (attention) attention->clear();

  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t start = h * head_width;
    const Var scores = scale(matmul_transpose_b(slice_cols(q, start, head_width), slice_cols(k, start, head_width)),
                             scale_factor);
    const Var probs = softmax_rows(scores);
    if (attention) attention->push_back(probs.value());
    outputs.push_back(matmul(probs, slice_cols(v, start, head_width)));
  }
  const Var merged = heads == 1 ? outputs.front() : concat_cols(outputs);
  return matmul(merged, tape.parameter(weights.output));
}

}  // namespace grnfuse
