// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration as one strict JSON document. Unknown keys anywhere are a
// ConfigError, so a misspelt ablation switch cannot silently fall back to its
// default.

#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>

#include "grnfuse/pipeline.hpp"
#include "grnfuse/synthetic.hpp"
#include "grnfuse/trainer.hpp"

namespace grnfuse {

struct EvalConfig {
  FinetuneConfig finetune;
  std::size_t holdout_every = 4;
  MappingSpace mapping = MappingSpace::kExpression;
};

struct AnalysisConfig {
  std::size_t eval_cells = 64;
  std::size_t dump_cells = 2;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  SyntheticConfig synthetic;
  LinkingOptions linking;
  ActivityOptions activity;
  TrainConfig train;
  EvalConfig eval;
  AnalysisConfig analysis;

  // Pushes the run-level seed and worker count into every stage.
  void propagate();
};

nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const TrainConfig& config);

// Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& doc);
TrainConfig train_config_from_json(const nlohmann::json& doc);

// ConfigError (a DataError) when the file is missing or malformed.
RunConfig load_run_config(const std::filesystem::path& path);

// Seed precedence: explicit flag, then the config's "seed", then the
// GRNFORMER_SEED environment variable, then 0.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const std::optional<nlohmann::json>& config_doc);

}  // namespace grnfuse
