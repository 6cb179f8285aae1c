// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// The structure-aware model: expression backbone, two-scale GraphSAGE
// encoder, cross-attention fusion and a per-token regression head, plus the
// per-cell forward pass shared by pretraining, fine-tuning and analysis.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "grnfuse/backbone.hpp"
#include "grnfuse/fusion.hpp"
#include "grnfuse/graph_encoder.hpp"

namespace grnfuse {

struct ModelConfig {
  BackboneConfig backbone;
  SageConfig sage;
  std::size_t fusion_heads = 4;

  void validate() const;
};

struct StructureAwareModel {
  ModelConfig config;
  std::size_t vocabulary_size = 0;
  BackboneParams backbone;
  SageParams sage;
  CrossAttentionParams fusion;
  DecoderParams decoder;
  Parameter perturbation_flag;  // [1 x d], added to the rows of flagged genes

  // Each component draws from its own init stream, so the backbone weights
  // do not depend on whether the other parts exist.
  static StructureAwareModel init(std::size_t vocabulary_size, const ModelConfig& config, std::uint64_t seed);

  // Fixed order; optimizer state and checkpoints are keyed by it.
  std::vector<Parameter*> parameters();
  std::vector<Parameter*> structure_parameters();
};

// Identifies the random streams of one forward pass.
struct PassKey {
  std::uint64_t seed = 0;
  std::uint64_t phase = 0;  // see kPhase* below
  std::uint64_t step = 0;
  std::uint64_t item = 0;   // cell or example index

  Rng stream(Stream purpose) const;
};

inline constexpr std::uint64_t kPhasePretrain = 0;
inline constexpr std::uint64_t kPhaseFinetune = 1;
inline constexpr std::uint64_t kPhaseAnalysis = 2;

struct CellInput {
  std::span<const double> expression;  // unmasked, one value per vocabulary gene
  const Grn* cell_grn = nullptr;
  const Grn* type_grn = nullptr;
  std::span<const GeneIndex> flagged;  // perturbed genes, may be empty
};

struct ForwardOptions {
  double alpha = 0.2;
  double beta = 1.0;
  bool use_structure = true;  // false runs the backbone alone
  bool return_attention = false;
};

struct ForwardResult {
  Var predictions;  // [n x 1]
  Var h_expr;       // [n x d]
  std::vector<Tensor> attention;
  std::size_t perturbed_cell_edges = 0;
  std::size_t perturbed_type_edges = 0;
};

// Gene-feature table: identity embeddings plus the flag on flagged rows.
Var gene_features(Tape& tape, StructureAwareModel& model, std::span<const GeneIndex> flagged);

// Structural embeddings for all genes: both GRNs perturbed against the cell's
// co-expression graph, encoded, and summed.
Var structural_embeddings(Var features, StructureAwareModel& model, const CellInput& cell, double alpha,
                          const PassKey& key, std::size_t* cell_edges = nullptr,
                          std::size_t* type_edges = nullptr);

ForwardResult forward_cell(Tape& tape, StructureAwareModel& model, const TokenSequence& tokens,
                           const CellInput& cell, const ForwardOptions& options, const PassKey& key);

}  // namespace grnfuse
