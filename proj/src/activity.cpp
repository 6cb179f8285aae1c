// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/activity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "grnfuse/errors.hpp"
#include "grnfuse/io.hpp"

namespace grnfuse {

std::vector<GeneIndex> rank_genes(std::span<const double> cell_expression) {
  std::vector<GeneIndex> order(cell_expression.size());
  std::iota(order.begin(), order.end(), GeneIndex{0});
  std::sort(order.begin(), order.end(), [&](GeneIndex a, GeneIndex b) {
    if (cell_expression[a] != cell_expression[b]) return cell_expression[a] > cell_expression[b];
    return a < b;
  });
  return order;
}

double aucell_score(std::span<const double> cell_expression, std::span<const GeneIndex> target_set,
                    double top_fraction) {
  if (target_set.empty()) throw ContractError("aucell_score: empty target set");
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) {
    throw ContractError("aucell_score: top_fraction must lie in (0, 1]");
  }
  const std::size_t genes = cell_expression.size();
  std::vector<bool> is_target(genes, false);
  std::size_t num_targets = 0;
  for (GeneIndex g : target_set) {
    if (g >= genes) throw ContractError("aucell_score: target index out of range");
    if (!is_target[g]) ++num_targets;
    is_target[g] = true;
  }
  // The epsilon keeps e.g. 0.05 * 200 from rounding up to 11.
  const auto cutoff = std::min<std::size_t>(
      genes, static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(genes) - 1e-9)));

  const auto order = rank_genes(cell_expression);
  double area = 0.0, best = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 1; r <= cutoff; ++r) {
    if (is_target[order[r - 1]]) ++hits;
    area += static_cast<double>(hits);
    best += static_cast<double>(std::min(r, num_targets));
  }
  return best > 0.0 ? area / best : 0.0;
}

std::vector<Regulon> regulons_of(const Grn& grn, const GeneVocabulary& vocab) {
  std::map<GeneIndex, std::vector<GeneIndex>> by_tf;
  for (const Edge& e : grn.edges()) by_tf[e.source].push_back(e.target);
  std::vector<Regulon> out;
  for (auto& [tf, targets] : by_tf) out.push_back(Regulon{vocab.name(tf), tf, std::move(targets)});
  return out;
}

ActivityMatrix::ActivityMatrix(std::vector<std::string> cell_ids, std::vector<std::string> regulon_ids,
                               std::vector<double> scores)
    : cell_ids_(std::move(cell_ids)), regulon_ids_(std::move(regulon_ids)), scores_(std::move(scores)) {
  if (scores_.size() != cell_ids_.size() * regulon_ids_.size()) {
    throw ShapeError("activity matrix size does not match cells x regulons");
  }
  for (double s : scores_) {
    if (!(s >= 0.0 && s <= 1.0)) throw DataError("activity score outside [0, 1]");
  }
}

std::vector<double> ActivityMatrix::regulon_column(std::size_t regulon) const {
  std::vector<double> out(num_cells());
  for (std::size_t c = 0; c < num_cells(); ++c) out[c] = (*this)(c, regulon);
  return out;
}

std::size_t ActivityMatrix::cell_index(const std::string& id) const {
  auto it = std::find(cell_ids_.begin(), cell_ids_.end(), id);
  if (it == cell_ids_.end()) throw LookupError("no activity scores for cell '" + id + "'");
  return static_cast<std::size_t>(it - cell_ids_.begin());
}

ActivityMatrix score_activity(const ExpressionMatrix& expression, std::span<const std::size_t> cells,
                              std::span<const Regulon> regulons, double top_fraction) {
  std::vector<std::string> cell_ids, regulon_ids;
  for (const Regulon& r : regulons) regulon_ids.push_back(r.id);
  std::vector<double> scores;
  scores.reserve(cells.size() * regulons.size());
  for (std::size_t c : cells) {
    cell_ids.push_back(expression.cell_ids().at(c));
    for (const Regulon& r : regulons) scores.push_back(aucell_score(expression.cell(c), r.targets, top_fraction));
  }
  return ActivityMatrix(std::move(cell_ids), std::move(regulon_ids), std::move(scores));
}

Grn derive_cell_grn(const Grn& celltype_grn, const std::map<std::string, GeneIndex>& regulon_tf,
                    const ActivityMatrix& activity,
                    const std::map<std::string, ThresholdDecision>& thresholds, const std::string& cell) {
  const std::size_t row = activity.cell_index(cell);
  std::vector<bool> tf_active(celltype_grn.num_genes(), false);
  for (std::size_t r = 0; r < activity.num_regulons(); ++r) {
    const std::string& id = activity.regulon_ids()[r];
    auto t = thresholds.find(id);
    if (t == thresholds.end()) throw ContractError("no threshold for regulon '" + id + "'");
    auto tf = regulon_tf.find(id);
    if (tf == regulon_tf.end()) throw ContractError("no TF recorded for regulon '" + id + "'");
    if (activity(row, r) > t->second.threshold) tf_active.at(tf->second) = true;
  }
  std::vector<Edge> edges;
  for (const Edge& e : celltype_grn.edges()) {
    if (tf_active[e.source]) edges.push_back(e);
  }
  return Grn(GrnScale::kCell, cell, celltype_grn.num_genes(), std::move(edges));
}

std::vector<std::vector<std::size_t>> reference_map(const EmbeddingSet& query, const EmbeddingSet& reference,
                                                    std::size_t k) {
  if (query.values.cols() != reference.values.cols()) {
    throw ShapeError("reference_map: embedding widths differ (" + shape_string(query.values) + " vs " +
                     shape_string(reference.values) + ")");
  }
  if (k == 0 || k > reference.values.rows()) {
    throw ContractError("reference_map: k must lie in [1, reference count]");
  }
  auto norms = [](const Tensor& t, const char* which) {
    std::vector<double> out(t.rows());
    for (std::size_t i = 0; i < t.rows(); ++i) {
      double s = 0.0;
      for (double v : t.row(i)) s += v * v;
      if (s == 0.0) throw ContractError(std::string("reference_map: zero-norm ") + which + " embedding at row " + std::to_string(i));
      out[i] = std::sqrt(s);
    }
    return out;
  };
  const auto qn = norms(query.values, "query");
  const auto rn = norms(reference.values, "reference");
  const Tensor dots = matmul_transpose_b(query.values, reference.values);

  std::vector<std::vector<std::size_t>> out(query.values.rows());
  std::vector<std::size_t> order(reference.values.rows());
  std::vector<double> sim(reference.values.rows());
  for (std::size_t q = 0; q < query.values.rows(); ++q) {
    for (std::size_t r = 0; r < sim.size(); ++r) sim[r] = dots(q, r) / (qn[q] * rn[r]);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return sim[a] != sim[b] ? sim[a] > sim[b] : a < b; });
    out[q].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

void save_activity_report(std::span<const ActivityRecord> records, const std::filesystem::path& path) {
  std::string out = "cell\tregulon\tauc\tthreshold\tactive\n";
  for (const auto& r : records) {
    out += r.cell + '\t' + r.regulon + '\t' + io::format_real(r.auc) + '\t' + io::format_real(r.threshold) +
           '\t' + (r.active ? "1" : "0") + '\n';
  }
  io::write_text(path, out);
}

std::vector<ActivityRecord> load_activity_report(const std::filesystem::path& path) {
  io::LineReader reader(path);
  std::string line;
  if (!reader.next(line) || line != "cell\tregulon\tauc\tthreshold\tactive") {
    throw ParseError(reader.source(), 1, "expected activity report header");
  }
  std::vector<ActivityRecord> out;
  while (reader.next(line)) {
    if (line.empty()) continue;
    auto f = io::split(line);
    if (f.size() != 5) throw ParseError(reader.source(), reader.line_number(), "expected 5 fields");
    if (f[4] != "0" && f[4] != "1") throw ParseError(reader.source(), reader.line_number(), "active must be 0 or 1");
    out.push_back(ActivityRecord{std::string(f[0]), std::string(f[1]),
                                 io::parse_real(f[2], reader.source(), reader.line_number()),
                                 io::parse_real(f[3], reader.source(), reader.line_number()), f[4] == "1"});
  }
  return out;
}

void save_threshold_report(std::span<const ThresholdRecord> records, const std::filesystem::path& path) {
  auto doc = nlohmann::json::array();
  for (const auto& r : records) {
    const auto& m = r.model;
    doc.push_back({{"cell_type", r.cell_type},
                   {"regulon", r.regulon},
                   {"pi", {m.weight[0], m.weight[1]}},
                   {"mu", {m.mean[0], m.mean[1]}},
                   {"sigma", {m.sigma(0), m.sigma(1)}},
                   {"class", to_string(r.decision.classification)},
                   {"method", to_string(r.decision.method)},
                   {"threshold", r.decision.threshold},
                   {"degenerate", r.degenerate}});
  }
  io::write_text(path, doc.dump(2) + "\n");
}

std::vector<ThresholdRecord> load_threshold_report(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  std::vector<ThresholdRecord> out;
  try {
    for (const auto& item : doc) {
      ThresholdRecord r;
      r.cell_type = item.at("cell_type").get<std::string>();
      r.regulon = item.at("regulon").get<std::string>();
      for (std::size_t k = 0; k < 2; ++k) {
        r.model.weight[k] = item.at("pi").at(k).get<double>();
        r.model.mean[k] = item.at("mu").at(k).get<double>();
        const double s = item.at("sigma").at(k).get<double>();
        r.model.variance[k] = s * s;
      }
      const auto cls = item.at("class").get<std::string>();
      if (cls != "bimodal" && cls != "skewed") throw DataError("unknown class '" + cls + "'");
      r.decision.classification = cls == "bimodal" ? Modality::kBimodal : Modality::kSkewed;
      r.decision.method = item.at("method").get<std::string>() == "intersection" ? ThresholdMethod::kIntersection
                                                                                 : ThresholdMethod::kMuPlus2Sigma;
      r.decision.threshold = item.at("threshold").get<double>();
      r.degenerate = item.value("degenerate", false);
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace grnfuse
