// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Regulon activity: AUCell scoring, activity-thresholded cell-specific GRNs,
// and nearest-neighbour mapping of query cells onto reference cells.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "grnfuse/expression.hpp"
#include "grnfuse/grn.hpp"
#include "grnfuse/mixture.hpp"
#include "grnfuse/tensor.hpp"

namespace grnfuse {

// Gene indices ordered by descending expression, ties by ascending index.
std::vector<GeneIndex> rank_genes(std::span<const double> cell_expression);

// Area under the target-recovery curve over the top ceil(top_fraction * G)
// ranks, divided by the largest area any target set of that size can reach.
double aucell_score(std::span<const double> cell_expression, std::span<const GeneIndex> target_set,
                    double top_fraction = 0.05);

struct Regulon {
  std::string id;
  GeneIndex tf = 0;
  std::vector<GeneIndex> targets;
};

// Regulons of a cell-type GRN: one per source TF, named after it.
std::vector<Regulon> regulons_of(const Grn& grn, const GeneVocabulary& vocab);

class ActivityMatrix {
 public:
  ActivityMatrix() = default;
  ActivityMatrix(std::vector<std::string> cell_ids, std::vector<std::string> regulon_ids,
                 std::vector<double> scores);

  std::size_t num_cells() const noexcept { return cell_ids_.size(); }
  std::size_t num_regulons() const noexcept { return regulon_ids_.size(); }
  const std::vector<std::string>& cell_ids() const noexcept { return cell_ids_; }
  const std::vector<std::string>& regulon_ids() const noexcept { return regulon_ids_; }
  double operator()(std::size_t cell, std::size_t regulon) const {
    return scores_[cell * regulon_ids_.size() + regulon];
  }
  std::vector<double> regulon_column(std::size_t regulon) const;
  std::size_t cell_index(const std::string& id) const;  // LookupError when absent

 private:
  std::vector<std::string> cell_ids_;
  std::vector<std::string> regulon_ids_;
  std::vector<double> scores_;
};

// Scores the listed cells (rows of `expression`) against every regulon.
ActivityMatrix score_activity(const ExpressionMatrix& expression, std::span<const std::size_t> cells,
                              std::span<const Regulon> regulons, double top_fraction = 0.05);

// Cell-specific GRN: the cell-type edges of every regulon whose score for
// `cell` strictly exceeds its threshold. Edge weights are kept unchanged.
Grn derive_cell_grn(const Grn& celltype_grn, const std::map<std::string, GeneIndex>& regulon_tf,
                    const ActivityMatrix& activity,
                    const std::map<std::string, ThresholdDecision>& thresholds, const std::string& cell);

struct EmbeddingSet {
  std::vector<std::string> ids;
  Tensor values;  // one row per id
};

// For each query row, the k reference rows of highest cosine similarity,
// best first; equal similarities go to the lower reference index.
std::vector<std::vector<std::size_t>> reference_map(const EmbeddingSet& query,
                                                    const EmbeddingSet& reference, std::size_t k = 1);

struct ThresholdRecord {
  std::string cell_type;
  std::string regulon;
  GaussianMixtureModel model;
  ThresholdDecision decision;
  bool degenerate = false;  // constant scores, no mixture fitted
};

struct ActivityRecord {
  std::string cell;
  std::string regulon;
  double auc = 0.0;
  double threshold = 0.0;
  bool active = false;
};

// TSV: `cell regulon auc threshold active`.
void save_activity_report(std::span<const ActivityRecord> records, const std::filesystem::path& path);
std::vector<ActivityRecord> load_activity_report(const std::filesystem::path& path);

// JSON array of {cell_type, regulon, pi, mu, sigma, class, method, threshold}.
void save_threshold_report(std::span<const ThresholdRecord> records, const std::filesystem::path& path);
std::vector<ThresholdRecord> load_threshold_report(const std::filesystem::path& path);

}  // namespace grnfuse
