// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// GraphSAGE encoding of regulatory networks with fixed-size neighbour
// sampling, plus co-expression guided edge perturbation.
//
// Aggregation runs over the undirected neighbourhood: targets hear from their
// TFs and TFs from their targets. Every vocabulary gene keeps a row, isolated
// genes aggregate a zero vector.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "grnfuse/autodiff.hpp"
#include "grnfuse/grn.hpp"
#include "grnfuse/random.hpp"

namespace grnfuse {

enum class Activation { kRelu, kIdentity };

struct SageConfig {
  std::size_t layers = 2;       // K
  std::size_t sample_size = 10;  // S
  bool with_replacement = false;
  Activation activation = Activation::kRelu;
};

struct SageParams {
  SageConfig config;
  std::vector<Parameter> weights;  // layer k: [2d x d], applied to concat(self, neighbourhood)

  static SageParams init(std::size_t width, const SageConfig& config, Rng& rng);
  std::size_t width() const;
  std::vector<Parameter*> parameters();
};

struct NodeEmbeddings {
  Var values;  // genes x d
  std::string scale;
};

// Uniform sample of min(S, degree) distinct neighbours, or exactly S draws
// with replacement; empty for isolated nodes either way.
std::vector<GeneIndex> sample_neighbors(std::span<const GeneIndex> neighbors, std::size_t sample_size,
                                        Rng& rng, bool with_replacement = false);
std::vector<GeneIndex> sample_neighbors(const Grn& grn, GeneIndex node, std::size_t sample_size, Rng& rng,
                                        bool with_replacement = false);

// Draws fresh neighbour samples for every layer from `rng`.
NodeEmbeddings sage_forward(const Grn& grn, Var input_features, SageParams& params, Rng& rng);

// Replaces floor(alpha * |E|) uniformly chosen edges with as many pairs drawn
// uniformly from the co-expression graph, skipping pairs already linked in
// either direction. Added edges have weight 1 and `augmented` set. When too
// few pairs are available it adds all of them and logs a warning.
Grn perturb_grn(const Grn& grn, const CoExpressionGraph& co_graph, double alpha, Rng& rng);

std::size_t perturbation_count(std::size_t num_edges, double alpha);

NodeEmbeddings combine_scales(const NodeEmbeddings& cell, const NodeEmbeddings& type);

}  // namespace grnfuse
