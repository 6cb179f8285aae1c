// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Stage glue shared by the CLI and the acceptance suite: GRN construction at
// both scales, cell-to-reference mapping, attention scans and perturbation
// evaluation.

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "grnfuse/activity.hpp"
#include "grnfuse/analysis.hpp"
#include "grnfuse/mixture.hpp"
#include "grnfuse/synthetic.hpp"
#include "grnfuse/trainer.hpp"

namespace grnfuse {

// Rows of `expression` listed in `cells`, in that order.
ExpressionMatrix select_cells(const ExpressionMatrix& expression, std::span<const std::size_t> cells);

// One cell-type GRN per type: each TF's enhancers for that type are linked to
// nearby non-TF genes correlated with the TF across the type's cells.
std::vector<Grn> build_cell_type_grns(const ExpressionMatrix& expression,
                                      const std::map<std::string, std::string>& cell_type_of,
                                      std::span<const EnhancerRecord> enhancers, const GeneVocabulary& vocab,
                                      const LinkingOptions& options = {});

struct ActivityOptions {
  double top_fraction = 0.05;
  GmmOptions gmm;
  BimodalityRule rule;
  std::uint64_t seed = 0;
};

struct CellGrnResult {
  std::vector<ThresholdRecord> thresholds;
  std::vector<ActivityRecord> activity;
  std::vector<Grn> cell_grns;  // one per cell, in expression order
};

// AUCell scoring, per-(type, regulon) mixture thresholds and the derived
// single-cell graphs.
CellGrnResult infer_cell_grns(const ExpressionMatrix& expression,
                              const std::map<std::string, std::string>& cell_type_of,
                              std::span<const Grn> type_grns, const GeneVocabulary& vocab,
                              const ActivityOptions& options = {});

GrnLookup make_lookup(std::span<const Grn> type_grns, std::span<const Grn> cell_grns,
                      const std::map<std::string, std::string>& cell_type_of);

// Mean-pooled backbone embedding of each unmasked profile, one row per profile.
Tensor pooled_embeddings(StructureAwareModel& model, const std::vector<std::span<const double>>& profiles);

enum class MappingSpace { kExpression, kBackbone };

// Points each example's grn_cell at its nearest reference cell by cosine
// similarity of raw profiles or of pooled backbone embeddings.
void map_examples_to_reference(StructureAwareModel& model, std::vector<PerturbationExample>& examples,
                               const ExpressionMatrix& reference, MappingSpace space = MappingSpace::kExpression);

struct ExampleSplit {
  std::vector<PerturbationExample> train;
  std::vector<PerturbationExample> test;
};

// Whole control cells go to one side: every `holdout_every`-th distinct
// control (in first-appearance order) is held out.
ExampleSplit split_examples(const std::vector<PerturbationExample>& examples, std::size_t holdout_every = 4);

struct AttentionScan {
  AttentionReport corpus;
  std::vector<std::size_t> cells;  // scanned rows of the expression matrix
};

using AttentionVisitor =
    std::function<void(std::size_t cell, std::span<const GeneIndex> genes, std::span<const Tensor> attention)>;

// Fusion attention over `count` cells taken from a seeded shuffle, read on
// unmasked tokens with unperturbed graphs (alpha = 0).
AttentionScan scan_attention(StructureAwareModel& model, const ExpressionMatrix& expression, const GrnLookup& grns,
                             const GeneVocabulary& vocab, std::size_t count, std::uint64_t seed,
                             const AttentionVisitor& visit = {});

struct PerturbationEval {
  std::vector<double> finetune_losses;
  std::vector<double> pcc;  // per held-out example, over its tokenized genes
  double mean_pcc = 0.0;
  // |predicted change| as a score for "gene responds to the perturbation",
  // per held-out example that has both responders and non-responders.
  std::vector<double> auc;
  double mean_auc = 0.0;
};

// Fine-tunes a copy of `pretrained` on `split.train` and scores `split.test`.
PerturbationEval evaluate_perturbation(const StructureAwareModel& pretrained, const ExampleSplit& split,
                                       const GrnLookup& grns, const FinetuneConfig& config);

}  // namespace grnfuse
