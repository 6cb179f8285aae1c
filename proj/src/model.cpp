// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/model.hpp"

#include "grnfuse/errors.hpp"

namespace grnfuse {

namespace {

constexpr std::uint64_t kInitBackbone = 1;
constexpr std::uint64_t kInitSage = 2;
constexpr std::uint64_t kInitFusion = 3;
constexpr std::uint64_t kInitDecoder = 4;
constexpr std::uint64_t kInitFlag = 5;

}  // namespace

void ModelConfig::validate() const {
  backbone.validate();
  if (sage.layers < 1 || sage.sample_size < 1) throw ContractError("SAGE needs K >= 1 and S >= 1");
  if (fusion_heads == 0 || backbone.hidden % fusion_heads != 0) {
    throw ContractError("fusion heads must divide the hidden width");
  }
}

StructureAwareModel StructureAwareModel::init(std::size_t vocabulary_size, const ModelConfig& config,
                                              std::uint64_t seed) {
  config.validate();
  if (vocabulary_size == 0) throw ContractError("model needs a non-empty vocabulary");
  const std::size_t d = config.backbone.hidden;
  StructureAwareModel m;
  m.config = config;
  m.vocabulary_size = vocabulary_size;
  Rng rb = make_rng({seed, tag(Stream::kInit), kInitBackbone});
  m.backbone = BackboneParams::init(vocabulary_size, config.backbone, rb);
  Rng rs = make_rng({seed, tag(Stream::kInit), kInitSage});
  m.sage = SageParams::init(d, config.sage, rs);
  Rng rf = make_rng({seed, tag(Stream::kInit), kInitFusion});
  m.fusion = CrossAttentionParams::init(d, config.fusion_heads, rf);
  Rng rd = make_rng({seed, tag(Stream::kInit), kInitDecoder});
  m.decoder = DecoderParams::init(d, rd);
  Rng rp = make_rng({seed, tag(Stream::kInit), kInitFlag});
  Tensor flag(1, d);
  for (double& v : flag.values()) v = standard_normal(rp);
  m.perturbation_flag = Parameter("finetune.perturbation_flag", std::move(flag));
  return m;
}

std::vector<Parameter*> StructureAwareModel::parameters() {
  std::vector<Parameter*> out = backbone.parameters();
  for (Parameter* p : sage.parameters()) out.push_back(p);
  for (Parameter* p : fusion.parameters()) out.push_back(p);
  for (Parameter* p : decoder.parameters()) out.push_back(p);
  out.push_back(&perturbation_flag);
  return out;
}

std::vector<Parameter*> StructureAwareModel::structure_parameters() {
  std::vector<Parameter*> out = sage.parameters();
  for (Parameter* p : fusion.parameters()) out.push_back(p);
  return out;
}

Rng PassKey::stream(Stream purpose) const { return make_rng({seed, phase, step, item, tag(purpose)}); }

Var gene_features(Tape& tape, StructureAwareModel& model, std::span<const GeneIndex> flagged) {
  const Var table = tape.parameter(model.backbone.gene_embedding);
  if (flagged.empty()) return table;
  Tensor indicator(model.vocabulary_size, 1);
  for (GeneIndex g : flagged) {
    if (g >= model.vocabulary_size) throw LookupError("flagged gene index " + std::to_string(g) + " outside vocabulary");
    indicator(g, 0) = 1.0;
  }
  return table + matmul(tape.constant(std::move(indicator)), tape.parameter(model.perturbation_flag));
}

Var structural_embeddings(Var features, StructureAwareModel& model, const CellInput& cell, double alpha,
                          const PassKey& key, std::size_t* cell_edges, std::size_t* type_edges) {
  if (cell.cell_grn == nullptr || cell.type_grn == nullptr) throw ContractError("structural path needs both GRNs");
  const CoExpressionGraph co = build_co_expression_graph(cell.expression, model.vocabulary_size);
  Rng perturb_cell = key.stream(Stream::kPerturbCell);
  Rng perturb_type = key.stream(Stream::kPerturbType);
  const Grn g_cell = perturb_grn(*cell.cell_grn, co, alpha, perturb_cell);
  const Grn g_type = perturb_grn(*cell.type_grn, co, alpha, perturb_type);
  if (cell_edges) *cell_edges = g_cell.num_edges();
  if (type_edges) *type_edges = g_type.num_edges();
  Rng sample_cell = key.stream(Stream::kSampleCell);
  Rng sample_type = key.stream(Stream::kSampleType);
  const NodeEmbeddings e_cell = sage_forward(g_cell, features, model.sage, sample_cell);
  const NodeEmbeddings e_type = sage_forward(g_type, features, model.sage, sample_type);
  return combine_scales(e_cell, e_type).values;
}

ForwardResult forward_cell(Tape& tape, StructureAwareModel& model, const TokenSequence& tokens,
                           const CellInput& cell, const ForwardOptions& options, const PassKey& key) {
  if (cell.expression.size() != model.vocabulary_size) {
    throw ShapeError("cell expression has " + std::to_string(cell.expression.size()) + " genes, model expects " +
                     std::to_string(model.vocabulary_size));
  }
  ForwardResult out;
  const Var features = gene_features(tape, model, cell.flagged);
  out.h_expr = encoder_forward(tokens, features, model.backbone);
  Var h_combined = out.h_expr;
  if (options.use_structure) {
    const Var h_struct_all = structural_embeddings(features, model, cell, options.alpha, key,
                                                   &out.perturbed_cell_edges, &out.perturbed_type_edges);
    std::vector<GeneIndex> genes;
    genes.reserve(tokens.size());
    for (const Token& t : tokens) genes.push_back(t.gene);
    const Var h_struct = gather_rows(h_struct_all, genes);
    FusionOutput fused = cross_attention(out.h_expr, genes, h_struct, genes, model.fusion, options.return_attention);
    out.attention = std::move(fused.attention);
    h_combined = combine(out.h_expr, fused.h_fusion, options.beta);
  }
  out.predictions = decoder_forward(h_combined, model.decoder);
  return out;
}

}  // namespace grnfuse
