// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Regulatory network data model: gene vocabulary, TF->target graphs at two
// scales, enhancer-driven regulon linking, and per-cell co-expression graphs.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "grnfuse/expression.hpp"

namespace grnfuse {

using GeneIndex = std::size_t;

struct GenomicPosition {
  std::string chrom;
  std::int64_t position = 0;

  bool operator==(const GenomicPosition&) const = default;
};

struct GenomicRegion {
  std::string chrom;
  std::int64_t start = 0;
  std::int64_t end = 0;  // inclusive

  bool operator==(const GenomicRegion&) const = default;
};

class GeneVocabulary {
 public:
  GeneVocabulary() = default;
  GeneVocabulary(std::vector<std::string> genes, const std::vector<std::string>& tfs);

  std::size_t size() const noexcept { return genes_.size(); }
  const std::string& name(GeneIndex g) const { return genes_.at(g); }
  const std::vector<std::string>& names() const noexcept { return genes_; }
  GeneIndex index(const std::string& name) const;  // LookupError when absent
  std::optional<GeneIndex> find(const std::string& name) const;

  bool is_tf(GeneIndex g) const { return is_tf_.at(g); }
  const std::vector<bool>& tf_mask() const noexcept { return is_tf_; }
  std::vector<GeneIndex> tf_indices() const;
  std::size_t num_tfs() const noexcept;

  void set_position(GeneIndex g, GenomicPosition pos);
  const std::optional<GenomicPosition>& position(GeneIndex g) const { return positions_.at(g); }

 private:
  std::vector<std::string> genes_;
  std::unordered_map<std::string, GeneIndex> index_;
  std::vector<bool> is_tf_;
  std::vector<std::optional<GenomicPosition>> positions_;
};

enum class GrnScale { kCellType, kCell };

std::string to_string(GrnScale scale);
GrnScale parse_scale(const std::string& text);

struct Edge {
  GeneIndex source = 0;
  GeneIndex target = 0;
  double weight = 1.0;
  bool augmented = false;  // added by co-expression perturbation

  bool operator==(const Edge&) const = default;
};

// Directed regulatory graph over a vocabulary of `num_genes` genes.
//
// Structural invariants (checked on construction): endpoints in range, no
// self-loops, no duplicate (source, target) pairs, weights finite and in
// (0, 1]. TF-sourced edges are checked against a vocabulary by the builders,
// and hold for every edge not flagged `augmented`.
class Grn {
 public:
  Grn() = default;
  Grn(GrnScale scale, std::string owner, std::size_t num_genes, std::vector<Edge> edges);

  GrnScale scale() const noexcept { return scale_; }
  const std::string& owner() const noexcept { return owner_; }
  std::size_t num_genes() const noexcept { return num_genes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  bool has_edge(GeneIndex source, GeneIndex target) const;

  // Throws DataError naming the edge if a non-augmented edge leaves a non-TF.
  void check_tf_sources(const GeneVocabulary& vocab) const;

  // Neighbour lists with edge direction ignored; sorted, duplicates removed.
  std::vector<std::vector<GeneIndex>> undirected_neighbors() const;

 private:
  GrnScale scale_ = GrnScale::kCellType;
  std::string owner_;
  std::size_t num_genes_ = 0;
  std::vector<Edge> edges_;
};

struct ERegulon {
  GeneIndex tf = 0;
  std::vector<GenomicRegion> enhancers;
  std::vector<std::pair<GeneIndex, double>> targets;  // (gene, Pearson r)
};

// Genes with strictly positive expression in one cell. The implied edge set is
// every unordered pair of active genes; it is never materialised.
struct CoExpressionGraph {
  std::string cell;
  std::vector<GeneIndex> active;  // ascending

  std::size_t num_pairs() const noexcept;
  bool contains(GeneIndex u, GeneIndex v) const;
};

CoExpressionGraph build_co_expression_graph(std::span<const double> cell_expression,
                                            std::size_t vocabulary_size,
                                            std::string cell_id = {});

struct LinkingOptions {
  double proximity_kb = 150.0;
  double corr_floor = 0.03;
};

// Distance from a gene coordinate to the nearest point of a region; nullopt
// when they sit on different chromosomes.
std::optional<std::int64_t> distance_to_region(const GenomicPosition& gene, const GenomicRegion& region);

double pearson(std::span<const double> x, std::span<const double> y);

// Keeps candidates within the proximity window of some enhancer and whose
// expression correlates with the TF's beyond the floor (|r| > floor).
ERegulon link_eregulon(GeneIndex tf, std::vector<GenomicRegion> enhancers,
                       std::span<const GeneIndex> candidate_targets, const GeneVocabulary& vocab,
                       const ExpressionMatrix& expression, const LinkingOptions& options = {});

// Union of TF->target edges with weight |r|; duplicate pairs keep the max.
Grn grn_from_eregulons(std::span<const ERegulon> eregulons, GrnScale scale, std::string owner,
                       const GeneVocabulary& vocab);

struct DegreeStats {
  double tf_mean_out_degree = 0.0;
  double non_tf_mean_degree = 0.0;   // in + out, averaged over all non-TF genes
  double zero_edge_fraction = 0.0;   // genes touching no edge
};

DegreeStats degree_stats(const Grn& grn, const GeneVocabulary& vocab);

// Total (in + out) edge count per gene.
std::vector<std::size_t> total_degrees(const Grn& grn);

// Edge-list TSV: header `source target weight scale owner`, gene names as ids.
// Several graphs may share one file; they are returned in order of first
// appearance of their (scale, owner) key.
void save_edge_list(std::span<const Grn> grns, const GeneVocabulary& vocab,
                    const std::filesystem::path& path);
std::vector<Grn> load_edge_list(const std::filesystem::path& path, const GeneVocabulary& vocab);

// Coordinate TSV: header `gene chrom position`.
void save_coordinates(const GeneVocabulary& vocab, const std::filesystem::path& path);
void load_coordinates(GeneVocabulary& vocab, const std::filesystem::path& path);

}  // namespace grnfuse
