// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "grnfuse/grn.hpp"
#include "grnfuse/tensor.hpp"

namespace grnfuse {

// phi_j = (1 / (H N)) sum_h sum_i A^(h)_ij. ContractError unless every matrix
// is N x N with rows summing to 1 within 1e-6.
std::vector<double> attention_importance(std::span<const Tensor> attention);

// Mean phi over `tf_set` divided by mean phi over the remaining entries.
double tf_enrichment_ratio(std::span<const double> phi, std::span<const std::size_t> tf_set);

struct AttentionReport {
  std::vector<GeneIndex> genes;  // gene of each phi entry
  std::vector<double> phi;
  double rho = 0.0;
  std::size_t heads = 0;
  std::size_t n = 0;  // query rows per matrix (single cell) or cells pooled (corpus)
  std::string scope;
};

// Accumulates per-cell importance into a corpus-level report: each gene's
// phi is its mean over the cells it appeared in, renormalised to sum to 1.
class ImportanceAccumulator {
 public:
  explicit ImportanceAccumulator(std::size_t vocabulary_size);
  void add(std::span<const GeneIndex> genes, std::span<const double> phi);
  std::size_t cells() const noexcept { return cells_; }
  // rho is taken over the genes that appeared at least once.
  AttentionReport report(const std::vector<bool>& tf_mask, std::size_t heads, const std::string& scope) const;

 private:
  std::vector<double> sum_;
  std::vector<std::size_t> count_;
  std::size_t cells_ = 0;
};

// Pearson correlation of (predicted - control) with (truth - control).
// DegenerateDataError when either delta is constant.
double pcc_delta(std::span<const double> predicted, std::span<const double> truth, std::span<const double> control);

// Mann-Whitney AUC with ties counted half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct DegreeAttentionRow {
  GeneIndex gene = 0;
  bool is_tf = false;
  std::size_t degree = 0;
  double phi = 0.0;
};

std::vector<DegreeAttentionRow> degree_attention_join(const Grn& grn, const AttentionReport& report,
                                                      const GeneVocabulary& vocab);
void save_degree_attention(std::span<const DegreeAttentionRow> rows, const GeneVocabulary& vocab,
                           const std::filesystem::path& path);

struct MetricRecord {
  std::string metric;
  std::string group;
  double value = 0.0;
  std::size_t n = 0;
};

void save_metrics(std::span<const MetricRecord> records, const std::filesystem::path& path);
std::vector<MetricRecord> load_metrics(const std::filesystem::path& path);

void save_attention_report(const AttentionReport& report, const GeneVocabulary& vocab,
                           const std::filesystem::path& path);

// <dir>/<cell>.head<h>.tsv per head plus <dir>/<cell>.json naming the genes.
void save_attention_dump(std::span<const Tensor> attention, std::span<const GeneIndex> genes,
                         const GeneVocabulary& vocab, const std::string& cell, const std::filesystem::path& dir);

}  // namespace grnfuse
