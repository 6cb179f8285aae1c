// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grnfuse/analysis.hpp"
#include "grnfuse/errors.hpp"

namespace grnfuse {

ExpressionMatrix select_cells(const ExpressionMatrix& expression, std::span<const std::size_t> cells) {
  std::vector<std::string> ids;
  std::vector<double> values;
  values.reserve(cells.size() * expression.num_genes());
  for (std::size_t c : cells) {
    ids.push_back(expression.cell_ids().at(c));
    const auto row = expression.cell(c);
    values.insert(values.end(), row.begin(), row.end());
  }
  return ExpressionMatrix(std::move(ids), expression.gene_ids(), std::move(values));
}

namespace {

std::map<std::string, std::vector<std::size_t>> cells_by_type(const ExpressionMatrix& expression,
                                                              const std::map<std::string, std::string>& cell_type_of) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t c = 0; c < expression.num_cells(); ++c) {
    const auto it = cell_type_of.find(expression.cell_ids()[c]);
    if (it == cell_type_of.end()) throw DataError("cell '" + expression.cell_ids()[c] + "' has no cell type");
    out[it->second].push_back(c);
  }
  return out;
}

}  // namespace

std::vector<Grn> build_cell_type_grns(const ExpressionMatrix& expression,
                                      const std::map<std::string, std::string>& cell_type_of,
                                      std::span<const EnhancerRecord> enhancers, const GeneVocabulary& vocab,
                                      const LinkingOptions& options) {
  std::vector<GeneIndex> candidates;
  for (GeneIndex g = 0; g < vocab.size(); ++g) {
    if (!vocab.is_tf(g)) candidates.push_back(g);
  }
  std::vector<Grn> out;
  for (const auto& [type, cells] : cells_by_type(expression, cell_type_of)) {
    const ExpressionMatrix sub = select_cells(expression, cells);
    std::map<GeneIndex, std::vector<GenomicRegion>> by_tf;
    for (const auto& e : enhancers) {
      if (e.cell_type == type) by_tf[e.tf].push_back(e.region);
    }
    std::vector<ERegulon> eregulons;
    for (auto& [tf, regions] : by_tf) {
      ERegulon r = link_eregulon(tf, std::move(regions), candidates, vocab, sub, options);
      if (!r.targets.empty()) eregulons.push_back(std::move(r));
    }
    if (eregulons.empty()) throw DataError("cell type '" + type + "' produced no eRegulons");
    out.push_back(grn_from_eregulons(eregulons, GrnScale::kCellType, type, vocab));
  }
  return out;
}

CellGrnResult infer_cell_grns(const ExpressionMatrix& expression,
                              const std::map<std::string, std::string>& cell_type_of,
                              std::span<const Grn> type_grns, const GeneVocabulary& vocab,
                              const ActivityOptions& options) {
  std::map<std::string, const Grn*> grn_of_type;
  for (const Grn& g : type_grns) grn_of_type[g.owner()] = &g;
  CellGrnResult result;
  std::map<std::string, Grn> per_cell;
  std::uint64_t type_index = 0;
  for (const auto& [type, cells] : cells_by_type(expression, cell_type_of)) {
    const auto found = grn_of_type.find(type);
    if (found == grn_of_type.end()) throw DataError("no cell-type GRN for type '" + type + "'");
    const Grn& type_grn = *found->second;
    const auto regulons = regulons_of(type_grn, vocab);
    const ActivityMatrix activity = score_activity(expression, cells, regulons, options.top_fraction);
    std::map<std::string, ThresholdDecision> thresholds;
    std::map<std::string, GeneIndex> regulon_tf;
    for (std::size_t r = 0; r < regulons.size(); ++r) {
      const auto scores = activity.regulon_column(r);
      ThresholdRecord rec;
      rec.cell_type = type;
      rec.regulon = regulons[r].id;
      try {
        rec.model = fit_gmm2(scores, mix_seed({options.seed, type_index, r}), options.gmm);
        rec.decision = select_threshold(rec.model, classify_distribution(rec.model, options.rule));
      } catch (const DegenerateDataError&) {
        rec.degenerate = true;
        rec.model.mean = {scores.front(), scores.front()};
        rec.model.variance = {0.0, 0.0};
        rec.decision = ThresholdDecision{Modality::kSkewed, scores.front(), ThresholdMethod::kMuPlus2Sigma};
      }
      thresholds[rec.regulon] = rec.decision;
      regulon_tf[rec.regulon] = regulons[r].tf;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        result.activity.push_back(ActivityRecord{activity.cell_ids()[i], rec.regulon, activity(i, r),
                                                 rec.decision.threshold, activity(i, r) > rec.decision.threshold});
      }
      result.thresholds.push_back(std::move(rec));
    }
    for (const auto& cell : activity.cell_ids()) {
      per_cell.emplace(cell, derive_cell_grn(type_grn, regulon_tf, activity, thresholds, cell));
    }
    ++type_index;
  }
  for (const auto& id : expression.cell_ids()) result.cell_grns.push_back(std::move(per_cell.at(id)));
  return result;
}

GrnLookup make_lookup(std::span<const Grn> type_grns, std::span<const Grn> cell_grns,
                      const std::map<std::string, std::string>& cell_type_of) {
  GrnLookup lookup;
  for (const Grn& g : type_grns) lookup.add_cell_type_grn(g.owner(), g);
  for (const Grn& g : cell_grns) lookup.add_cell_grn(g.owner(), g);
  for (const auto& [cell, type] : cell_type_of) lookup.assign_type(cell, type);
  return lookup;
}

Tensor pooled_embeddings(StructureAwareModel& model, const std::vector<std::span<const double>>& profiles) {
  const std::size_t d = model.config.backbone.hidden;
  Tensor out(profiles.size(), d);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const TokenSequence tokens = tokenize_cell(profiles[i], model.config.backbone);
    if (tokens.empty()) throw DataError("cannot embed a profile with no expressed genes");
    Tape tape;
    const Tensor& h = encoder_forward(tape, tokens, model.backbone).value();
    for (std::size_t r = 0; r < h.rows(); ++r) {
      for (std::size_t c = 0; c < d; ++c) out(i, c) += h(r, c);
    }
    for (std::size_t c = 0; c < d; ++c) out(i, c) /= static_cast<double>(h.rows());
  }
  return out;
}

void map_examples_to_reference(StructureAwareModel& model, std::vector<PerturbationExample>& examples,
                               const ExpressionMatrix& reference, MappingSpace space) {
  std::vector<std::span<const double>> ref_profiles;
  for (std::size_t c = 0; c < reference.num_cells(); ++c) ref_profiles.push_back(reference.cell(c));
  std::vector<std::span<const double>> query_profiles;
  std::vector<std::string> ids;
  for (const auto& ex : examples) {
    query_profiles.push_back(ex.control);
    ids.push_back(ex.id);
  }
  auto embed = [&](const std::vector<std::span<const double>>& profiles) {
    if (space == MappingSpace::kBackbone) return pooled_embeddings(model, profiles);
    Tensor out(profiles.size(), reference.num_genes());
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      if (profiles[i].size() != reference.num_genes()) throw ShapeError("profile width differs from the reference");
      std::copy(profiles[i].begin(), profiles[i].end(), out.row(i).begin());
    }
    return out;
  };
  const EmbeddingSet ref{reference.cell_ids(), embed(ref_profiles)};
  const EmbeddingSet query{ids, embed(query_profiles)};
  const auto nearest = reference_map(query, ref, 1);
  for (std::size_t i = 0; i < examples.size(); ++i) examples[i].grn_cell = reference.cell_ids()[nearest[i].front()];
}

ExampleSplit split_examples(const std::vector<PerturbationExample>& examples, std::size_t holdout_every) {
  if (holdout_every < 2) throw ContractError("holdout_every must be at least 2");
  std::map<std::string, std::size_t> control_rank;
  ExampleSplit split;
  for (const auto& ex : examples) {
    const auto [it, inserted] = control_rank.emplace(ex.control_id, control_rank.size());
    (it->second % holdout_every == holdout_every - 1 ? split.test : split.train).push_back(ex);
  }
  return split;
}

AttentionScan scan_attention(StructureAwareModel& model, const ExpressionMatrix& expression, const GrnLookup& grns,
                             const GeneVocabulary& vocab, std::size_t count, std::uint64_t seed,
                             const AttentionVisitor& visit) {
  if (expression.num_genes() != vocab.size()) throw AlignmentError("expression and vocabulary differ in genes");
  if (count == 0 || count > expression.num_cells()) {
    throw ContractError("attention scan wants " + std::to_string(count) + " of " +
                        std::to_string(expression.num_cells()) + " cells");
  }
  std::vector<std::size_t> order(expression.num_cells());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng({seed, tag(Stream::kAnalysis)});
  for (std::size_t i = 0; i < count; ++i) std::swap(order[i], order[i + uniform_index(rng, order.size() - i)]);
  order.resize(count);

  AttentionScan scan;
  ImportanceAccumulator acc(vocab.size());
  const ForwardOptions options{0.0, 1.0, true, true};
  for (std::size_t c : order) {
    const std::string& id = expression.cell_ids()[c];
    const auto [cell_grn, type_grn] = grns.resolve(id);
    const CellInput input{expression.cell(c), cell_grn, type_grn, {}};
    const TokenSequence tokens = tokenize_cell(input.expression, model.config.backbone);
    if (tokens.empty()) continue;
    Tape tape;
    const ForwardResult out = forward_cell(tape, model, tokens, input, options, PassKey{seed, kPhaseAnalysis, 0, c});
    std::vector<GeneIndex> genes;
    for (const Token& t : tokens) genes.push_back(t.gene);
    acc.add(genes, attention_importance(out.attention));
    if (visit) visit(c, genes, out.attention);
    scan.cells.push_back(c);
  }
  scan.corpus = acc.report(vocab.tf_mask(), model.fusion.heads, "corpus");
  return scan;
}

PerturbationEval evaluate_perturbation(const StructureAwareModel& pretrained, const ExampleSplit& split,
                                       const GrnLookup& grns, const FinetuneConfig& config) {
  if (split.test.empty()) throw ContractError("evaluate_perturbation: no held-out examples");
  StructureAwareModel model = pretrained;
  PerturbationEval eval;
  eval.finetune_losses = finetune_perturbation(model, split.train, grns, config);
  double total = 0.0;
  for (const auto& ex : split.test) {
    const auto predicted = predict_perturbation(model, ex, grns, config);
    const TokenSequence tokens = tokenize_perturbation(ex.control, ex.perturbed, model.config.backbone);
    std::vector<double> p, t, c;
    for (const Token& tok : tokens) {
      p.push_back(predicted[tok.gene]);
      t.push_back(ex.post[tok.gene]);
      c.push_back(ex.control[tok.gene]);
    }
    eval.pcc.push_back(pcc_delta(p, t, c));
    total += eval.pcc.back();

    std::vector<double> score;
    std::vector<int> responds;
    for (std::size_t i = 0; i < p.size(); ++i) {
      score.push_back(std::abs(p[i] - c[i]));
      responds.push_back(t[i] != c[i] ? 1 : 0);
    }
    const auto positives = std::count(responds.begin(), responds.end(), 1);
    if (positives > 0 && positives < static_cast<std::ptrdiff_t>(responds.size())) {
      eval.auc.push_back(roc_auc(score, responds));
    }
  }
  eval.mean_pcc = total / static_cast<double>(eval.pcc.size());
  if (!eval.auc.empty()) {
    eval.mean_auc = std::accumulate(eval.auc.begin(), eval.auc.end(), 0.0) / static_cast<double>(eval.auc.size());
  }
  return eval;
}

}  // namespace grnfuse
