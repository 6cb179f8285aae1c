// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multiome generator with planted regulatory structure. Every piece
// of ground truth (graphs, activity modes, perturbation effects) is written
// out so tests never have to re-derive it from a fitted model.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "grnfuse/expression.hpp"
#include "grnfuse/grn.hpp"
#include "grnfuse/trainer.hpp"

namespace grnfuse {

inline constexpr const char* kGeneratorVersion = "grnfuse-synth/1";

struct SyntheticConfig {
  std::size_t cells = 500;
  std::size_t genes = 200;
  std::size_t tfs = 20;
  std::size_t cell_types = 4;
  std::size_t targets_per_tf = 15;
  double bimodal_fraction = 0.5;
  double noise = 0.2;
  double regulon_presence = 0.75;  // chance a TF's regulon exists in a cell type
  double regulated_fraction = 0.6;  // share of non-TFs that may be targeted
  double dropout = 0.3;
  std::size_t perturb_controls_per_type = 40;
  std::size_t perturbations_per_control = 2;
  double perturb_effect = 1.0;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError when infeasible
};

struct PlantedRegulon {
  std::string cell_type;
  GeneIndex tf = 0;
  bool bimodal = false;
  double on_fraction = 1.0;             // bimodal only
  std::array<double, 2> mode_means{};  // bimodal: {off, on}; skewed: both the single mean
};

struct EnhancerRecord {
  std::string cell_type;
  GeneIndex tf = 0;
  GenomicRegion region;
};

struct SyntheticDataset {
  SyntheticConfig config;
  GeneVocabulary vocab;
  ExpressionMatrix expression;
  std::vector<std::string> cell_type_names;
  std::vector<std::string> cell_type_of;  // per cell
  std::vector<Grn> planted;               // one cell-type graph per type
  std::vector<PlantedRegulon> regulons;
  std::vector<EnhancerRecord> enhancers;
  std::vector<PerturbationExample> perturbations;
  std::vector<std::string> perturbation_cell_type;  // true type of each control
};

SyntheticDataset gen_synthetic(const SyntheticConfig& config);

struct ManifestFile {
  std::string role;
  std::string path;  // relative to the manifest directory
  std::string checksum;
};

struct DatasetManifest {
  std::string generator_version;
  std::uint64_t seed = 0;
  std::vector<ManifestFile> files;

  const ManifestFile& file(const std::string& role) const;  // LookupError when absent
};

// Writes every file of the dataset plus manifest.json into `dir`.
DatasetManifest write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir);

// Checks that every listed file exists and matches its checksum.
DatasetManifest load_manifest(const std::filesystem::path& manifest_path);

// Everything downstream stages read back from a dataset directory.
struct LoadedDataset {
  std::filesystem::path dir;
  DatasetManifest manifest;
  GeneVocabulary vocab;
  ExpressionMatrix expression;
  std::map<std::string, std::string> cell_type_of;
  std::vector<EnhancerRecord> enhancers;
  std::vector<PerturbationExample> perturbations;
};

LoadedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace grnfuse
