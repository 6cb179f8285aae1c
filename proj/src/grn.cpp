// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/grn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "grnfuse/errors.hpp"
#include "grnfuse/io.hpp"

namespace grnfuse {

namespace {

std::uint64_t pair_key(GeneIndex a, GeneIndex b) {
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

}  // namespace

GeneVocabulary::GeneVocabulary(std::vector<std::string> genes, const std::vector<std::string>& tfs)
    : genes_(std::move(genes)), is_tf_(genes_.size(), false), positions_(genes_.size()) {
  for (GeneIndex g = 0; g < genes_.size(); ++g) {
    if (!index_.emplace(genes_[g], g).second) {
      throw DataError("duplicate gene identifier '" + genes_[g] + "'");
    }
  }
  for (const auto& tf : tfs) {
    auto it = index_.find(tf);
    if (it == index_.end()) throw DataError("transcription factor '" + tf + "' is not in the vocabulary");
    is_tf_[it->second] = true;
  }
}

GeneIndex GeneVocabulary::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw LookupError("unknown gene '" + name + "'");
  return it->second;
}

std::optional<GeneIndex> GeneVocabulary::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<GeneIndex> GeneVocabulary::tf_indices() const {
  std::vector<GeneIndex> out;
  for (GeneIndex g = 0; g < is_tf_.size(); ++g) {
    if (is_tf_[g]) out.push_back(g);
  }
  return out;
}

std::size_t GeneVocabulary::num_tfs() const noexcept {
  return static_cast<std::size_t>(std::count(is_tf_.begin(), is_tf_.end(), true));
}

void GeneVocabulary::set_position(GeneIndex g, GenomicPosition pos) { positions_.at(g) = std::move(pos); }

std::string to_string(GrnScale scale) {
  return scale == GrnScale::kCellType ? "cell-type" : "cell";
}

GrnScale parse_scale(const std::string& text) {
  if (text == "cell-type") return GrnScale::kCellType;
  if (text == "cell") return GrnScale::kCell;
  throw DataError("unknown GRN scale '" + text + "'");
}

Grn::Grn(GrnScale scale, std::string owner, std::size_t num_genes, std::vector<Edge> edges)
    : scale_(scale), owner_(std::move(owner)), num_genes_(num_genes), edges_(std::move(edges)) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(edges_.size() * 2);
  for (const Edge& e : edges_) {
    if (e.source >= num_genes_ || e.target >= num_genes_) {
      throw DataError("edge endpoint out of range in GRN '" + owner_ + "'");
    }
    if (e.source == e.target) {
      throw DataError("self-loop on gene " + std::to_string(e.source) + " in GRN '" + owner_ + "'");
    }
    if (!std::isfinite(e.weight) || e.weight <= 0.0 || e.weight > 1.0) {
      throw DataError("edge weight outside (0, 1] in GRN '" + owner_ + "'");
    }
    if (!seen.insert(pair_key(e.source, e.target)).second) {
      throw DataError("duplicate edge " + std::to_string(e.source) + "->" + std::to_string(e.target) +
                      " in GRN '" + owner_ + "'");
    }
  }
}

bool Grn::has_edge(GeneIndex source, GeneIndex target) const {
  return std::any_of(edges_.begin(), edges_.end(),
                     [&](const Edge& e) { return e.source == source && e.target == target; });
}

void Grn::check_tf_sources(const GeneVocabulary& vocab) const {
  if (vocab.size() != num_genes_) throw ShapeError("GRN and vocabulary sizes differ");
  for (const Edge& e : edges_) {
    if (!e.augmented && !vocab.is_tf(e.source)) {
      throw DataError("edge " + vocab.name(e.source) + "->" + vocab.name(e.target) +
                      " does not originate at a transcription factor");
    }
  }
}

std::vector<std::vector<GeneIndex>> Grn::undirected_neighbors() const {
  std::vector<std::vector<GeneIndex>> nbrs(num_genes_);
  for (const Edge& e : edges_) {
    nbrs[e.source].push_back(e.target);
    nbrs[e.target].push_back(e.source);
  }
  for (auto& list : nbrs) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return nbrs;
}

std::size_t CoExpressionGraph::num_pairs() const noexcept {
  const std::size_t k = active.size();
  return k < 2 ? 0 : k * (k - 1) / 2;
}

bool CoExpressionGraph::contains(GeneIndex u, GeneIndex v) const {
  return u != v && std::binary_search(active.begin(), active.end(), u) &&
         std::binary_search(active.begin(), active.end(), v);
}

CoExpressionGraph build_co_expression_graph(std::span<const double> cell_expression,
                                            std::size_t vocabulary_size, std::string cell_id) {
  if (cell_expression.size() != vocabulary_size) {
    throw ShapeError("cell expression has " + std::to_string(cell_expression.size()) +
                     " genes, vocabulary has " + std::to_string(vocabulary_size));
  }
  CoExpressionGraph graph{std::move(cell_id), {}};
  for (GeneIndex g = 0; g < cell_expression.size(); ++g) {
    if (cell_expression[g] > 0.0) graph.active.push_back(g);
  }
  return graph;
}

std::optional<std::int64_t> distance_to_region(const GenomicPosition& gene, const GenomicRegion& region) {
  if (gene.chrom != region.chrom) return std::nullopt;
  if (gene.position < region.start) return region.start - gene.position;
  if (gene.position > region.end) return gene.position - region.end;
  return 0;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("pearson: vectors differ in length");
  if (x.size() < 2) throw ContractError("pearson needs at least two observations");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateDataError("pearson: constant input vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ERegulon link_eregulon(GeneIndex tf, std::vector<GenomicRegion> enhancers,
                       std::span<const GeneIndex> candidate_targets, const GeneVocabulary& vocab,
                       const ExpressionMatrix& expression, const LinkingOptions& options) {
  if (tf >= vocab.size() || !vocab.is_tf(tf)) {
    throw ContractError("link_eregulon: gene " + std::to_string(tf) + " is not a transcription factor");
  }
  if (expression.num_genes() != vocab.size()) {
    throw ShapeError("expression matrix and vocabulary sizes differ");
  }
  if (options.corr_floor < 0.0 || options.proximity_kb < 0.0) {
    throw ContractError("link_eregulon: negative threshold");
  }
  if (!vocab.position(tf)) throw DataError("missing genomic coordinates for gene '" + vocab.name(tf) + "'");

  const auto window = static_cast<std::int64_t>(std::llround(options.proximity_kb * 1000.0));
  const std::vector<double> tf_expr = expression.gene_column(tf);
  ERegulon out{tf, std::move(enhancers), {}};
  for (GeneIndex g : candidate_targets) {
    if (g >= vocab.size()) throw ContractError("candidate gene index out of range");
    const auto& pos = vocab.position(g);
    if (!pos) throw DataError("missing genomic coordinates for gene '" + vocab.name(g) + "'");
    if (g == tf) continue;
    const bool near = std::any_of(out.enhancers.begin(), out.enhancers.end(), [&](const GenomicRegion& r) {
      auto d = distance_to_region(*pos, r);
      return d && *d <= window;
    });
    if (!near) continue;
    double r = 0.0;
    try {
      r = pearson(tf_expr, expression.gene_column(g));
    } catch (const DegenerateDataError&) {
      continue;  // undefined correlation never passes the floor
    }
    if (std::abs(r) > options.corr_floor) out.targets.emplace_back(g, r);
  }
  return out;
}

Grn grn_from_eregulons(std::span<const ERegulon> eregulons, GrnScale scale, std::string owner,
                       const GeneVocabulary& vocab) {
  std::vector<Edge> edges;
  std::unordered_map<std::uint64_t, std::size_t> slot;
  for (const ERegulon& reg : eregulons) {
    for (const auto& [target, r] : reg.targets) {
      const double w = std::abs(r);
      auto [it, inserted] = slot.emplace(pair_key(reg.tf, target), edges.size());
      if (inserted) {
        edges.push_back(Edge{reg.tf, target, w, false});
      } else {
        edges[it->second].weight = std::max(edges[it->second].weight, w);
      }
    }
  }
  Grn grn(scale, std::move(owner), vocab.size(), std::move(edges));
  grn.check_tf_sources(vocab);
  return grn;
}

std::vector<std::size_t> total_degrees(const Grn& grn) {
  std::vector<std::size_t> deg(grn.num_genes(), 0);
  for (const Edge& e : grn.edges()) {
    ++deg[e.source];
    ++deg[e.target];
  }
  return deg;
}

DegreeStats degree_stats(const Grn& grn, const GeneVocabulary& vocab) {
  if (vocab.size() != grn.num_genes()) throw ShapeError("GRN and vocabulary sizes differ");
  std::vector<std::size_t> out_deg(grn.num_genes(), 0);
  for (const Edge& e : grn.edges()) ++out_deg[e.source];
  const auto deg = total_degrees(grn);

  DegreeStats s;
  std::size_t tf_count = 0, non_tf_count = 0, zero = 0;
  double tf_total = 0.0, non_tf_total = 0.0;
  for (GeneIndex g = 0; g < grn.num_genes(); ++g) {
    if (deg[g] == 0) ++zero;
    if (vocab.is_tf(g)) {
      ++tf_count;
      tf_total += static_cast<double>(out_deg[g]);
    } else {
      ++non_tf_count;
      non_tf_total += static_cast<double>(deg[g]);
    }
  }
  if (tf_count > 0) s.tf_mean_out_degree = tf_total / static_cast<double>(tf_count);
  if (non_tf_count > 0) s.non_tf_mean_degree = non_tf_total / static_cast<double>(non_tf_count);
  if (grn.num_genes() > 0) s.zero_edge_fraction = static_cast<double>(zero) / static_cast<double>(grn.num_genes());
  return s;
}

void save_edge_list(std::span<const Grn> grns, const GeneVocabulary& vocab, const std::filesystem::path& path) {
  std::string out = "source\ttarget\tweight\tscale\towner\n";
  for (const Grn& grn : grns) {
    if (grn.num_genes() != vocab.size()) throw ShapeError("GRN and vocabulary sizes differ");
    const std::string scale = to_string(grn.scale());
    for (const Edge& e : grn.edges()) {
      out += vocab.name(e.source);
      out += '\t';
      out += vocab.name(e.target);
      out += '\t';
      out += io::format_real(e.weight);
      out += '\t';
      out += scale;
      out += '\t';
      out += grn.owner();
      out += '\n';
    }
  }
  io::write_text(path, out);
}

std::vector<Grn> load_edge_list(const std::filesystem::path& path, const GeneVocabulary& vocab) {
  io::LineReader reader(path);
  std::string line;
  if (!reader.next(line) || line != "source\ttarget\tweight\tscale\towner") {
    throw ParseError(reader.source(), 1, "expected header 'source\\ttarget\\tweight\\tscale\\towner'");
  }
  struct Pending {
    GrnScale scale;
    std::string owner;
    std::vector<Edge> edges;
  };
  std::vector<Pending> graphs;
  std::map<std::pair<int, std::string>, std::size_t> slot;
  while (reader.next(line)) {
    if (line.empty()) continue;
    auto f = io::split(line);
    if (f.size() != 5) {
      throw ParseError(reader.source(), reader.line_number(), "expected 5 fields, found " + std::to_string(f.size()));
    }
    auto lookup = [&](std::string_view name) {
      auto g = vocab.find(std::string(name));
      if (!g) throw ParseError(reader.source(), reader.line_number(), "unknown gene '" + std::string(name) + "'");
      return *g;
    };
    Edge e{lookup(f[0]), lookup(f[1]), io::parse_real(f[2], reader.source(), reader.line_number()), false};
    GrnScale scale;
    try {
      scale = parse_scale(std::string(f[3]));
    } catch (const DataError& err) {
      throw ParseError(reader.source(), reader.line_number(), err.what());
    }
    std::string owner(f[4]);
    auto key = std::make_pair(static_cast<int>(scale), owner);
    auto [it, inserted] = slot.emplace(key, graphs.size());
    if (inserted) graphs.push_back(Pending{scale, owner, {}});
    graphs[it->second].edges.push_back(e);
  }
  std::vector<Grn> out;
  for (auto& p : graphs) {
    out.emplace_back(p.scale, p.owner, vocab.size(), std::move(p.edges));
    out.back().check_tf_sources(vocab);
  }
  return out;
}

void save_coordinates(const GeneVocabulary& vocab, const std::filesystem::path& path) {
  std::string out = "gene\tchrom\tposition\n";
  for (GeneIndex g = 0; g < vocab.size(); ++g) {
    const auto& pos = vocab.position(g);
    if (!pos) continue;
    out += vocab.name(g) + '\t' + pos->chrom + '\t' + std::to_string(pos->position) + '\n';
  }
  io::write_text(path, out);
}

void load_coordinates(GeneVocabulary& vocab, const std::filesystem::path& path) {
  io::LineReader reader(path);
  std::string line;
  if (!reader.next(line) || line != "gene\tchrom\tposition") {
    throw ParseError(reader.source(), 1, "expected header 'gene\\tchrom\\tposition'");
  }
  while (reader.next(line)) {
    if (line.empty()) continue;
    auto f = io::split(line);
    if (f.size() != 3) throw ParseError(reader.source(), reader.line_number(), "expected 3 fields");
    auto g = vocab.find(std::string(f[0]));
    if (!g) throw ParseError(reader.source(), reader.line_number(), "unknown gene '" + std::string(f[0]) + "'");
    vocab.set_position(*g, GenomicPosition{std::string(f[1]),
                                           io::parse_integer(f[2], reader.source(), reader.line_number())});
  }
}

}  // namespace grnfuse
