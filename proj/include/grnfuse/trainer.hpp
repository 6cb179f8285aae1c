// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "grnfuse/expression.hpp"
#include "grnfuse/model.hpp"
#include "grnfuse/optim.hpp"

namespace grnfuse {

struct TrainConfig {
  double alpha = 0.2;
  double beta = 1.0;
  std::size_t batch_size = 8;
  std::size_t steps = 300;
  std::uint64_t seed = 0;
  AdamConfig adam;
  ModelConfig model;
  bool use_structure = true;  // false: backbone-only reference pipeline
  std::size_t workers = 1;

  void validate() const;
};

// Resolves a cell id to its (cell-level, cell-type-level) GRN pair.
class GrnLookup {
 public:
  void add_cell_type_grn(const std::string& cell_type, Grn grn);
  void add_cell_grn(const std::string& cell, Grn grn);
  void assign_type(const std::string& cell, const std::string& cell_type);
  // `cell` borrows both graphs of `reference_cell` (reference mapping).
  void alias(const std::string& cell, const std::string& reference_cell);

  // DataError naming the cell when either graph is missing.
  std::pair<const Grn*, const Grn*> resolve(const std::string& cell) const;

  const std::map<std::string, Grn>& cell_type_grns() const noexcept { return type_grns_; }
  const std::map<std::string, Grn>& cell_grns() const noexcept { return cell_grns_; }

 private:
  std::map<std::string, Grn> type_grns_;
  std::map<std::string, Grn> cell_grns_;
  std::map<std::string, std::string> cell_type_;
  std::map<std::string, std::string> alias_;
};

struct TrainState {
  StructureAwareModel model;
  Adam optimizer;
  std::uint64_t step = 0;
  std::vector<double> losses;  // batch-mean loss per completed step

  static TrainState fresh(std::size_t vocabulary_size, const TrainConfig& config);
};

// Cells of step `step`: consecutive slices of a sequence of per-epoch
// permutations, so any step's batch is known without replaying earlier ones.
std::vector<std::size_t> batch_for_step(std::size_t num_cells, std::size_t batch_size, std::uint64_t seed,
                                        std::uint64_t step);

// One optimisation step over `batch` (cell indices of `expression`). Returns
// the batch-mean masked reconstruction loss.
double pretrain_step(const ExpressionMatrix& expression, std::span<const std::size_t> batch, const GrnLookup& grns,
                     TrainState& state, const TrainConfig& config);

// Runs until state.step == config.steps. `on_step` sees the state after each
// step (checkpointing hooks).
void pretrain(const ExpressionMatrix& expression, const GrnLookup& grns, const TrainConfig& config, TrainState& state,
              const std::function<void(TrainState&)>& on_step = {});

void save_checkpoint(TrainState& state, const TrainConfig& config, const std::filesystem::path& path);
// Restores parameters, optimizer moments, step and loss log into `state`,
// which must already have the checkpoint's architecture.
void load_checkpoint(TrainState& state, const std::filesystem::path& path);
TrainConfig checkpoint_config(const std::filesystem::path& path);
// Fresh state with the checkpoint's architecture, then load_checkpoint.
TrainState restore_train_state(const std::filesystem::path& path);

struct PerturbationExample {
  std::string id;
  std::string control_id;
  std::string grn_cell;  // cell id used for GRN lookup
  std::vector<double> control;
  std::vector<GeneIndex> perturbed;
  std::vector<double> post;
};

struct FinetuneConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 8;
  double alpha = 0.2;
  double beta = 1.0;
  bool use_structure = true;
  bool freeze_backbone = false;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

// Control genes with non-zero expression, then any flagged genes not already
// present, carrying value 0.
TokenSequence tokenize_perturbation(std::span<const double> control, std::span<const GeneIndex> flagged,
                                    const BackboneConfig& config);

// Trains `model` in place on post-perturbation regression; returns per-step
// losses.
std::vector<double> finetune_perturbation(StructureAwareModel& model, std::span<const PerturbationExample> examples,
                                          const GrnLookup& grns, const FinetuneConfig& config);

// Full expression vector: model output on tokenized genes, control elsewhere.
// Structure is used unperturbed.
std::vector<double> predict_perturbation(StructureAwareModel& model, const PerturbationExample& example,
                                         const GrnLookup& grns, const FinetuneConfig& config);

}  // namespace grnfuse
