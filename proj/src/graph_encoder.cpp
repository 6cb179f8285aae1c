// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/graph_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <unordered_set>

#include "grnfuse/errors.hpp"

namespace grnfuse {

namespace {

std::uint64_t unordered_key(GeneIndex a, GeneIndex b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

// First `k` entries of `items` become a uniform k-subset (partial Fisher-Yates).
template <typename T>
void shuffle_prefix(std::vector<T>& items, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, items.size() - i);
    std::swap(items[i], items[j]);
  }
}

}  // namespace

SageParams SageParams::init(std::size_t width, const SageConfig& config, Rng& rng) {
  if (config.layers < 1 || config.sample_size < 1) throw ContractError("SAGE needs K >= 1 and S >= 1");
  SageParams p;
  p.config = config;
  const double stddev = std::sqrt(2.0 / static_cast<double>(2 * width + width));
  for (std::size_t k = 0; k < config.layers; ++k) {
    Tensor w(2 * width, width);
    for (double& v : w.values()) v = stddev * standard_normal(rng);
    p.weights.emplace_back("sage.w" + std::to_string(k), std::move(w));
  }
  return p;
}

std::size_t SageParams::width() const { return weights.empty() ? 0 : weights.front().value.cols(); }

std::vector<Parameter*> SageParams::parameters() {
  std::vector<Parameter*> out;
  for (auto& w : weights) out.push_back(&w);
  return out;
}

std::vector<GeneIndex> sample_neighbors(std::span<const GeneIndex> neighbors, std::size_t sample_size, Rng& rng,
                                        bool with_replacement) {
  if (neighbors.empty()) return {};
  if (with_replacement) {
    std::vector<GeneIndex> out(sample_size);
    for (auto& g : out) g = neighbors[uniform_index(rng, neighbors.size())];
    return out;
  }
  std::vector<GeneIndex> pool(neighbors.begin(), neighbors.end());
  if (pool.size() <= sample_size) return pool;
  shuffle_prefix(pool, sample_size, rng);
  pool.resize(sample_size);
  return pool;
}

std::vector<GeneIndex> sample_neighbors(const Grn& grn, GeneIndex node, std::size_t sample_size, Rng& rng,
                                        bool with_replacement) {
  const auto nbrs = grn.undirected_neighbors();
  return sample_neighbors(nbrs.at(node), sample_size, rng, with_replacement);
}

NodeEmbeddings sage_forward(const Grn& grn, Var input_features, SageParams& params, Rng& rng) {
  const std::size_t d = params.width();
  if (input_features.cols() != d || input_features.rows() != grn.num_genes()) {
    throw ShapeError("sage_forward: features " + shape_string(input_features.value()) + " for " +
                     std::to_string(grn.num_genes()) + " genes and width " + std::to_string(d));
  }
  Tape& tape = input_features.tape();
  const auto adjacency = grn.undirected_neighbors();
  std::vector<std::vector<GeneIndex>> groups(adjacency.size());
  Var h = input_features;
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    for (std::size_t v = 0; v < adjacency.size(); ++v) {
      groups[v] = sample_neighbors(adjacency[v], params.config.sample_size, rng, params.config.with_replacement);
    }
    Var neighborhood = mean_rows_by_group(h, groups);
    const Var parts[] = {h, neighborhood};
    h = matmul(concat_cols(parts), tape.parameter(params.weights[k]));
    if (params.config.activation == Activation::kRelu) h = relu(h);
  }
  return NodeEmbeddings{h, to_string(grn.scale())};
}

std::size_t perturbation_count(std::size_t num_edges, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ContractError("perturbation ratio must lie in [0, 1)");
  // The epsilon absorbs products such as 0.29 * 100 = 28.999999999999996.
  return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(num_edges) + 1e-9));
}

Grn perturb_grn(const Grn& grn, const CoExpressionGraph& co_graph, double alpha, Rng& rng) {
  const std::size_t k = perturbation_count(grn.num_edges(), alpha);
  if (k == 0) return grn;

  std::vector<std::size_t> order(grn.num_edges());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_prefix(order, k, rng);
  std::vector<bool> dropped(grn.num_edges(), false);
  for (std::size_t i = 0; i < k; ++i) dropped[order[i]] = true;

  std::vector<Edge> edges;
  edges.reserve(grn.num_edges());
  std::unordered_set<std::uint64_t> linked;
  for (std::size_t i = 0; i < grn.num_edges(); ++i) {
    const Edge& e = grn.edges()[i];
    linked.insert(unordered_key(e.source, e.target));
    if (!dropped[i]) edges.push_back(e);
  }

  const auto& active = co_graph.active;
  std::vector<bool> is_active(grn.num_genes(), false);
  for (GeneIndex g : active) {
    if (g >= grn.num_genes()) throw ShapeError("co-expression gene outside the GRN vocabulary");
    is_active[g] = true;
  }
  std::size_t linked_active = 0;
  for (std::uint64_t key : linked) {
    if (is_active[key >> 32] && is_active[key & 0xffffffffULL]) ++linked_active;
  }
  const std::size_t available = co_graph.num_pairs() - linked_active;

  std::vector<std::uint64_t> chosen;
  if (available <= 4 * k) {
    // Enumerate: small pools, or pools where rejection would stall.
    std::vector<std::uint64_t> pool;
    pool.reserve(available);
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const auto key = unordered_key(active[i], active[j]);
        if (!linked.count(key)) pool.push_back(key);
      }
    }
    const std::size_t take = std::min(k, pool.size());
    shuffle_prefix(pool, take, rng);
    chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    if (take < k) {
      std::clog << "warning: GRN '" << grn.owner() << "': only " << take << " of " << k
                << " co-expression edges available for perturbation\n";
    }
  } else {
    std::unordered_set<std::uint64_t> taken;
    while (chosen.size() < k) {
      const GeneIndex a = active[uniform_index(rng, active.size())];
      const GeneIndex b = active[uniform_index(rng, active.size())];
      if (a == b) continue;
      const auto key = unordered_key(a, b);
      if (linked.count(key) || !taken.insert(key).second) continue;
      chosen.push_back(key);
    }
  }
  for (std::uint64_t key : chosen) {
    edges.push_back(Edge{static_cast<GeneIndex>(key >> 32), static_cast<GeneIndex>(key & 0xffffffffULL), 1.0, true});
  }
  return Grn(grn.scale(), grn.owner(), grn.num_genes(), std::move(edges));
}

NodeEmbeddings combine_scales(const NodeEmbeddings& cell, const NodeEmbeddings& type) {
  if (!cell.values.value().same_shape(type.values.value())) {
    throw ShapeError("combine_scales: " + shape_string(cell.values.value()) + " vs " +
                     shape_string(type.values.value()));
  }
  return NodeEmbeddings{add(cell.values, type.values), "combined"};
}

}  // namespace grnfuse
