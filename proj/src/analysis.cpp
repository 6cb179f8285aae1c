// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "grnfuse/errors.hpp"
#include "grnfuse/io.hpp"

namespace grnfuse {

std::vector<double> attention_importance(std::span<const Tensor> attention) {
  if (attention.empty()) throw ContractError("attention_importance: no heads");
  const std::size_t n = attention.front().rows();
  if (n == 0) throw ContractError("attention_importance: empty matrices");
  std::vector<double> phi(n, 0.0);
  for (const Tensor& a : attention) {
    if (a.rows() != n || a.cols() != n) {
      throw ContractError("attention_importance: expected " + std::to_string(n) + "x" + std::to_string(n) +
                          " matrices, got " + shape_string(a));
    }
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (a(i, j) < 0.0) throw ContractError("attention_importance: negative attention weight");
        row += a(i, j);
        phi[j] += a(i, j);
      }
      if (std::abs(row - 1.0) > 1e-6) {
        throw ContractError("attention_importance: row " + std::to_string(i) + " sums to " + io::format_real(row));
      }
    }
  }
  const double norm = 1.0 / static_cast<double>(attention.size() * n);
  for (double& v : phi) v *= norm;
  const double total = std::accumulate(phi.begin(), phi.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-6) throw NumericError("attention importance does not sum to 1");
  return phi;
}

double tf_enrichment_ratio(std::span<const double> phi, std::span<const std::size_t> tf_set) {
  std::vector<bool> in_set(phi.size(), false);
  for (std::size_t j : tf_set) {
    if (j >= phi.size()) throw ContractError("tf_enrichment_ratio: TF index out of range");
    in_set[j] = true;
  }
  double tf_sum = 0.0, rest_sum = 0.0;
  std::size_t tf_n = 0, rest_n = 0;
  for (std::size_t j = 0; j < phi.size(); ++j) {
    if (in_set[j]) {
      tf_sum += phi[j];
      ++tf_n;
    } else {
      rest_sum += phi[j];
      ++rest_n;
    }
  }
  if (tf_n == 0 || rest_n == 0) throw ContractError("tf_enrichment_ratio: TF set or its complement is empty");
  const double rest_mean = rest_sum / static_cast<double>(rest_n);
  if (!(rest_mean > 0.0)) throw ContractError("tf_enrichment_ratio: non-TF mean is zero");
  return (tf_sum / static_cast<double>(tf_n)) / rest_mean;
}

ImportanceAccumulator::ImportanceAccumulator(std::size_t vocabulary_size)
    : sum_(vocabulary_size, 0.0), count_(vocabulary_size, 0) {}

void ImportanceAccumulator::add(std::span<const GeneIndex> genes, std::span<const double> phi) {
  if (genes.size() != phi.size()) throw ShapeError("importance genes and phi differ in length");
  for (std::size_t i = 0; i < genes.size(); ++i) {
    if (genes[i] >= sum_.size()) throw ContractError("importance gene outside vocabulary");
    sum_[genes[i]] += phi[i];
    ++count_[genes[i]];
  }
  ++cells_;
}

AttentionReport ImportanceAccumulator::report(const std::vector<bool>& tf_mask, std::size_t heads,
                                              const std::string& scope) const {
  AttentionReport r;
  r.heads = heads;
  r.n = cells_;
  r.scope = scope;
  double total = 0.0;
  for (GeneIndex g = 0; g < sum_.size(); ++g) {
    if (count_[g] == 0) continue;
    r.genes.push_back(g);
    r.phi.push_back(sum_[g] / static_cast<double>(count_[g]));
    total += r.phi.back();
  }
  if (r.genes.empty()) throw ContractError("importance report over zero cells");
  for (double& v : r.phi) v /= total;
  std::vector<std::size_t> tf_positions;
  for (std::size_t i = 0; i < r.genes.size(); ++i) {
    if (tf_mask.at(r.genes[i])) tf_positions.push_back(i);
  }
  r.rho = tf_enrichment_ratio(r.phi, tf_positions);
  return r;
}

double pcc_delta(std::span<const double> predicted, std::span<const double> truth, std::span<const double> control) {
  const std::size_t n = control.size();
  if (predicted.size() != n || truth.size() != n) throw ShapeError("pcc_delta: vectors differ in length");
  if (n < 2) throw ContractError("pcc_delta needs at least two genes");
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = predicted[i] - control[i];
    b[i] = truth[i] - control[i];
  }
  return pearson(a, b);
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Ranks doubled so tied midranks stay integral and the sum is exact.
  std::uint64_t positive_rank2 = 0;
  std::uint64_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t midrank2 = i + j + 1;  // 2 * mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0 && labels[order[k]] != 1) throw ContractError("roc_auc: labels must be 0 or 1");
      if (labels[order[k]] == 1) {
        positive_rank2 += midrank2;
        ++positives;
      }
    }
    i = j;
  }
  const std::uint64_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) throw ContractError("roc_auc needs both classes");
  // U = sum of positive ranks - P(P+1)/2; doubled: 2U = rank2 - P(P+1).
  const std::uint64_t u2 = positive_rank2 - positives * (positives + 1);
  return static_cast<double>(u2) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

std::vector<DegreeAttentionRow> degree_attention_join(const Grn& grn, const AttentionReport& report,
                                                      const GeneVocabulary& vocab) {
  if (grn.num_genes() != vocab.size()) throw AlignmentError("degree_attention_join: GRN and vocabulary differ");
  if (report.genes.size() != report.phi.size()) throw ShapeError("attention report genes and phi differ");
  const auto degrees = total_degrees(grn);
  std::vector<DegreeAttentionRow> rows;
  rows.reserve(report.genes.size());
  for (std::size_t i = 0; i < report.genes.size(); ++i) {
    const GeneIndex g = report.genes[i];
    rows.push_back(DegreeAttentionRow{g, vocab.is_tf(g), degrees.at(g), report.phi[i]});
  }
  return rows;
}

void save_degree_attention(std::span<const DegreeAttentionRow> rows, const GeneVocabulary& vocab,
                           const std::filesystem::path& path) {
  std::string out = "gene\tis_tf\tdegree\tphi\n";
  for (const auto& r : rows) {
    out += vocab.name(r.gene) + "\t" + (r.is_tf ? "1" : "0") + "\t" + std::to_string(r.degree) + "\t" +
           io::format_real(r.phi) + "\n";
  }
  io::write_text(path, out);
}

void save_metrics(std::span<const MetricRecord> records, const std::filesystem::path& path) {
  std::string out = "metric,group,value,n\n";
  for (const auto& r : records) {
    if (r.metric.find(',') != std::string::npos || r.group.find(',') != std::string::npos) {
      throw ContractError("metric names and groups may not contain commas");
    }
    out += r.metric + "," + r.group + "," + io::format_real(r.value) + "," + std::to_string(r.n) + "\n";
  }
  io::write_text(path, out);
}

std::vector<MetricRecord> load_metrics(const std::filesystem::path& path) {
  io::LineReader in(path);
  std::string line;
  if (!in.next(line) || line != "metric,group,value,n") {
    throw ParseError(in.source(), in.line_number(), "expected header metric,group,value,n");
  }
  std::vector<MetricRecord> out;
  while (in.next(line)) {
    const auto f = io::split(line, ',');
    if (f.size() != 4) throw ParseError(in.source(), in.line_number(), "expected 4 fields");
    out.push_back(MetricRecord{std::string(f[0]), std::string(f[1]),
                               io::parse_real(f[2], in.source(), in.line_number()),
                               static_cast<std::size_t>(io::parse_integer(f[3], in.source(), in.line_number()))});
  }
  return out;
}

void save_attention_report(const AttentionReport& report, const GeneVocabulary& vocab,
                           const std::filesystem::path& path) {
  nlohmann::json doc;
  std::vector<std::string> genes;
  for (GeneIndex g : report.genes) genes.push_back(vocab.name(g));
  doc["genes"] = genes;
  doc["phi"] = report.phi;
  doc["rho"] = report.rho;
  doc["H"] = report.heads;
  doc["N"] = report.n;
  doc["scope"] = report.scope;
  io::write_text(path, doc.dump(2) + "\n");
}

void save_attention_dump(std::span<const Tensor> attention, std::span<const GeneIndex> genes,
                         const GeneVocabulary& vocab, const std::string& cell, const std::filesystem::path& dir) {
  for (std::size_t h = 0; h < attention.size(); ++h) {
    const Tensor& a = attention[h];
    if (a.rows() != genes.size() || a.cols() != genes.size()) throw ShapeError("attention dump: genes do not match");
    std::string out;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) {
        if (j) out += '\t';
        out += io::format_real(a(i, j));
      }
      out += '\n';
    }
    io::write_text(dir / (cell + ".head" + std::to_string(h) + ".tsv"), out);
  }
  nlohmann::json side;
  std::vector<std::string> names;
  for (GeneIndex g : genes) names.push_back(vocab.name(g));
  side["cell"] = cell;
  side["heads"] = attention.size();
  side["genes"] = names;
  io::write_text(dir / (cell + ".json"), side.dump(2) + "\n");
}

}  // namespace grnfuse
