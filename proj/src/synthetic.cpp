// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <set>
#include <sstream>

#include "grnfuse/errors.hpp"
#include "grnfuse/io.hpp"

namespace grnfuse {

namespace {

using nlohmann::json;

constexpr std::int64_t kGeneSpacing = 1'000'000;
constexpr std::int64_t kEnhancerReach = 100'000;
constexpr std::int64_t kEnhancerLength = 500;
constexpr std::size_t kChromosomes = 4;
constexpr std::size_t kDecoysPerRegulon = 3;

// Sub-streams of the generator, so adding draws to one part leaves the others
// unchanged.
enum Part : std::uint64_t { kLayout = 1, kPresence, kCells, kEnhancers, kControls, kPerturbChoice };

std::string gene_name(std::size_t g, std::size_t tfs) {
  char buf[32];
  if (g < tfs) {
    std::snprintf(buf, sizeof buf, "TF%02zu", g);
  } else {
    std::snprintf(buf, sizeof buf, "G%03zu", g - tfs);
  }
  return buf;
}

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

struct Planted {
  std::vector<std::vector<std::pair<GeneIndex, double>>> targets;  // per TF: (gene, weight)
  std::vector<double> base;                                        // per gene
  std::vector<bool> regulated;
  std::vector<std::vector<double>> type_level;  // [type][gene], unregulated genes
  // [type][tf]
  std::vector<std::vector<bool>> present;
  std::vector<std::vector<bool>> bimodal;
  std::vector<std::vector<double>> on_fraction;
};

constexpr double kOnMean = 0.8;
constexpr double kOffMean = 0.15;
constexpr double kModeSd = 0.08;
constexpr double kSkewedMean = 0.3;
constexpr double kSkewedSd = 0.12;

double draw_activity(const Planted& p, std::size_t type, std::size_t tf, Rng& rng) {
  if (!p.present[type][tf]) return 0.0;
  double a;
  if (p.bimodal[type][tf]) {
    const bool on = uniform01(rng) < p.on_fraction[type][tf];
    a = (on ? kOnMean : kOffMean) + kModeSd * standard_normal(rng);
  } else {
    a = kSkewedMean + kSkewedSd * standard_normal(rng);
  }
  return std::clamp(a, 0.0, 1.0);
}

std::vector<double> draw_cell(const Planted& p, const SyntheticConfig& cfg, std::size_t type, Rng& rng) {
  std::vector<double> activity(cfg.tfs);
  for (std::size_t f = 0; f < cfg.tfs; ++f) activity[f] = draw_activity(p, type, f, rng);
  std::vector<double> x(cfg.genes, 0.0);
  for (std::size_t f = 0; f < cfg.tfs; ++f) {
    x[f] = 0.3 + 3.0 * activity[f] + cfg.noise * standard_normal(rng);
  }
  for (std::size_t g = cfg.tfs; g < cfg.genes; ++g) {
    x[g] = (p.regulated[g] ? p.base[g] : p.type_level[type][g]) + cfg.noise * standard_normal(rng);
  }
  for (std::size_t f = 0; f < cfg.tfs; ++f) {
    if (!p.present[type][f]) continue;
    for (const auto& [g, w] : p.targets[f]) x[g] += 3.0 * w * activity[f];
  }
  for (std::size_t g = 0; g < cfg.genes; ++g) {
    const double drop = g < cfg.tfs ? 0.1 : (p.regulated[g] ? cfg.dropout : 0.4);
    const double u = uniform01(rng);
    x[g] = u < drop ? 0.0 : std::max(0.0, x[g]);
  }
  return x;
}

std::string join_genes(const std::vector<GeneIndex>& genes, const GeneVocabulary& vocab) {
  std::string out;
  for (GeneIndex g : genes) {
    if (!out.empty()) out += ',';
    out += vocab.name(g);
  }
  return out;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (cells == 0 || genes == 0 || tfs == 0 || cell_types == 0 || targets_per_tf == 0) {
    throw ConfigError("synthetic counts must be positive");
  }
  if (tfs >= genes) throw ConfigError("TF count must be below the gene count");
  if (cell_types > cells) throw ConfigError("more cell types than cells");
  const auto pool = static_cast<std::size_t>(regulated_fraction * static_cast<double>(genes - tfs));
  if (targets_per_tf > pool) {
    throw ConfigError("targets_per_tf " + std::to_string(targets_per_tf) + " exceeds the regulated pool of " +
                      std::to_string(pool) + " genes");
  }
  for (double f : {bimodal_fraction, regulon_presence, regulated_fraction, dropout}) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("synthetic fractions must lie in [0, 1]");
  }
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");
  if (perturbations_per_control > tfs) throw ConfigError("more perturbations per control than TFs");
}

SyntheticDataset gen_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const std::uint64_t s = cfg.seed;
  auto part = [&](Part p) { return make_rng({s, tag(Stream::kSynthetic), p}); };

  std::vector<std::string> names;
  std::vector<std::string> tf_names;
  for (std::size_t g = 0; g < cfg.genes; ++g) {
    names.push_back(gene_name(g, cfg.tfs));
    if (g < cfg.tfs) tf_names.push_back(names.back());
  }
  SyntheticDataset data;
  data.config = cfg;
  data.vocab = GeneVocabulary(names, tf_names);
  for (std::size_t g = 0; g < cfg.genes; ++g) {
    data.vocab.set_position(g, GenomicPosition{"chr" + std::to_string(1 + g % kChromosomes),
                                               kGeneSpacing * static_cast<std::int64_t>(g / kChromosomes + 1)});
  }

  Planted p;
  Rng layout = part(kLayout);
  std::vector<GeneIndex> non_tf;
  for (std::size_t g = cfg.tfs; g < cfg.genes; ++g) non_tf.push_back(g);
  for (std::size_t i = non_tf.size(); i > 1; --i) std::swap(non_tf[i - 1], non_tf[uniform_index(layout, i)]);
  const auto pool_size = static_cast<std::size_t>(cfg.regulated_fraction * static_cast<double>(non_tf.size()));
  std::vector<GeneIndex> pool(non_tf.begin(), non_tf.begin() + static_cast<std::ptrdiff_t>(pool_size));
  std::sort(pool.begin(), pool.end());
  p.regulated.assign(cfg.genes, false);
  p.base.assign(cfg.genes, 0.0);
  for (GeneIndex g : pool) {
    p.regulated[g] = true;
    p.base[g] = uniform(layout, 0.1, 0.6);
  }
  p.targets.resize(cfg.tfs);
  for (std::size_t f = 0; f < cfg.tfs; ++f) {
    std::vector<GeneIndex> shuffled = pool;
    for (std::size_t i = 0; i < cfg.targets_per_tf; ++i) {
      std::swap(shuffled[i], shuffled[i + uniform_index(layout, shuffled.size() - i)]);
    }
    std::vector<GeneIndex> chosen(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(cfg.targets_per_tf));
    std::sort(chosen.begin(), chosen.end());
    for (GeneIndex g : chosen) p.targets[f].emplace_back(g, uniform(layout, 0.5, 1.0));
  }

  Rng presence = part(kPresence);
  p.present.assign(cfg.cell_types, std::vector<bool>(cfg.tfs));
  p.bimodal.assign(cfg.cell_types, std::vector<bool>(cfg.tfs));
  p.on_fraction.assign(cfg.cell_types, std::vector<double>(cfg.tfs, 1.0));
  p.type_level.assign(cfg.cell_types, std::vector<double>(cfg.genes, 0.0));
  for (std::size_t t = 0; t < cfg.cell_types; ++t) {
    for (std::size_t g = cfg.tfs; g < cfg.genes; ++g) {
      if (!p.regulated[g]) p.type_level[t][g] = uniform(presence, 0.2, 1.5);
    }
  }
  for (std::size_t t = 0; t < cfg.cell_types; ++t) {
    data.cell_type_names.push_back("type" + std::to_string(t));
    for (std::size_t f = 0; f < cfg.tfs; ++f) {
      p.present[t][f] = uniform01(presence) < cfg.regulon_presence;
      p.bimodal[t][f] = uniform01(presence) < cfg.bimodal_fraction;
      p.on_fraction[t][f] = uniform(presence, 0.3, 0.7);
      if (!p.present[t][f]) continue;
      PlantedRegulon r{data.cell_type_names[t], f, p.bimodal[t][f], 1.0, {kSkewedMean, kSkewedMean}};
      if (r.bimodal) {
        r.on_fraction = p.on_fraction[t][f];
        r.mode_means = {kOffMean, kOnMean};
      }
      data.regulons.push_back(r);
    }
  }
  // A type with no regulon at all would leave its cells without a graph.
  for (std::size_t t = 0; t < cfg.cell_types; ++t) {
    if (std::none_of(p.present[t].begin(), p.present[t].end(), [](bool b) { return b; })) {
      throw ConfigError("cell type " + data.cell_type_names[t] + " drew no regulons; raise regulon_presence");
    }
  }

  for (std::size_t t = 0; t < cfg.cell_types; ++t) {
    std::vector<Edge> edges;
    for (std::size_t f = 0; f < cfg.tfs; ++f) {
      if (!p.present[t][f]) continue;
      for (const auto& [g, w] : p.targets[f]) edges.push_back(Edge{f, g, w, false});
    }
    data.planted.emplace_back(GrnScale::kCellType, data.cell_type_names[t], cfg.genes, std::move(edges));
  }

  Rng cells = part(kCells);
  std::vector<std::string> cell_ids;
  std::vector<double> values;
  values.reserve(cfg.cells * cfg.genes);
  for (std::size_t c = 0; c < cfg.cells; ++c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "cell%04zu", c);
    cell_ids.emplace_back(buf);
    const std::size_t t = c % cfg.cell_types;
    data.cell_type_of.push_back(data.cell_type_names[t]);
    const auto x = draw_cell(p, cfg, t, cells);
    values.insert(values.end(), x.begin(), x.end());
  }
  data.expression = ExpressionMatrix(std::move(cell_ids), names, std::move(values));

  Rng enh = part(kEnhancers);
  for (std::size_t t = 0; t < cfg.cell_types; ++t) {
    for (std::size_t f = 0; f < cfg.tfs; ++f) {
      if (!p.present[t][f]) continue;
      for (const auto& [g, w] : p.targets[f]) {
        const auto& pos = *data.vocab.position(g);
        const std::int64_t centre =
            pos.position + static_cast<std::int64_t>(uniform_index(enh, 2 * kEnhancerReach + 1)) - kEnhancerReach;
        data.enhancers.push_back(EnhancerRecord{data.cell_type_names[t], f,
                                                GenomicRegion{pos.chrom, centre - kEnhancerLength / 2,
                                                              centre + kEnhancerLength / 2}});
      }
      for (std::size_t k = 0; k < kDecoysPerRegulon; ++k) {
        // Halfway between neighbouring genes: 500 kb from either.
        const std::size_t chrom = uniform_index(enh, kChromosomes);
        const std::int64_t slot = static_cast<std::int64_t>(uniform_index(enh, cfg.genes / kChromosomes)) + 1;
        const std::int64_t centre = slot * kGeneSpacing + kGeneSpacing / 2;
        data.enhancers.push_back(EnhancerRecord{data.cell_type_names[t], f,
                                                GenomicRegion{"chr" + std::to_string(chrom + 1),
                                                              centre - kEnhancerLength / 2,
                                                              centre + kEnhancerLength / 2}});
      }
    }
  }

  Rng controls = part(kControls);
  Rng choice = part(kPerturbChoice);
  std::size_t example = 0;
  for (std::size_t i = 0; i < cfg.perturb_controls_per_type; ++i) {
    for (std::size_t t = 0; t < cfg.cell_types; ++t) {
      const auto control = draw_cell(p, cfg, t, controls);
      char control_id[32];
      std::snprintf(control_id, sizeof control_id, "ctrl%04zu", i * cfg.cell_types + t);
      std::vector<GeneIndex> candidates;
      for (std::size_t f = 0; f < cfg.tfs; ++f) {
        if (p.present[t][f]) candidates.push_back(f);
      }
      const std::size_t n = std::min(cfg.perturbations_per_control, candidates.size());
      for (std::size_t k = 0; k < n; ++k) {
        std::swap(candidates[k], candidates[k + uniform_index(choice, candidates.size() - k)]);
      }
      for (std::size_t k = 0; k < n; ++k) {
        const GeneIndex f = candidates[k];
        PerturbationExample ex;
        char buf[32];
        std::snprintf(buf, sizeof buf, "pert%04zu", example++);
        ex.id = buf;
        ex.control_id = control_id;
        ex.control = control;
        ex.perturbed = {f};
        ex.post = control;
        for (const auto& [g, w] : p.targets[f]) ex.post[g] += cfg.perturb_effect;
        data.perturbations.push_back(std::move(ex));
        data.perturbation_cell_type.push_back(data.cell_type_names[t]);
      }
    }
  }
  return data;
}

const ManifestFile& DatasetManifest::file(const std::string& role) const {
  for (const auto& f : files) {
    if (f.role == role) return f;
  }
  throw LookupError("manifest lists no '" + role + "' file");
}

DatasetManifest write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DatasetManifest m{kGeneratorVersion, data.config.seed, {}};
  auto record = [&](const std::string& role, const std::string& name) {
    m.files.push_back(ManifestFile{role, name, io::file_checksum(dir / name)});
  };
  const auto& vocab = data.vocab;

  save_matrix(data.expression, dir / "expression.tsv");
  record("expression", "expression.tsv");
  save_coordinates(vocab, dir / "coordinates.tsv");
  record("coordinates", "coordinates.tsv");

  std::string tfs;
  for (GeneIndex g : vocab.tf_indices()) tfs += vocab.name(g) + "\n";
  io::write_text(dir / "tfs.txt", tfs);
  record("tfs", "tfs.txt");

  std::string types = "cell\tcell_type\n";
  for (std::size_t c = 0; c < data.expression.num_cells(); ++c) {
    types += data.expression.cell_ids()[c] + "\t" + data.cell_type_of[c] + "\n";
  }
  io::write_text(dir / "cell_types.tsv", types);
  record("cell_types", "cell_types.tsv");

  std::string enh = "cell_type\ttf\tchrom\tstart\tend\n";
  for (const auto& e : data.enhancers) {
    enh += e.cell_type + "\t" + vocab.name(e.tf) + "\t" + e.region.chrom + "\t" + std::to_string(e.region.start) +
           "\t" + std::to_string(e.region.end) + "\n";
  }
  io::write_text(dir / "enhancers.tsv", enh);
  record("enhancers", "enhancers.tsv");

  save_edge_list(data.planted, vocab, dir / "grn_truth.tsv");
  record("grn_truth", "grn_truth.tsv");

  std::string reg = "cell_type\ttf\tclass\ton_fraction\tmean_low\tmean_high\n";
  for (const auto& r : data.regulons) {
    reg += r.cell_type + "\t" + vocab.name(r.tf) + "\t" + (r.bimodal ? "bimodal" : "skewed") + "\t" +
           io::format_real(r.on_fraction) + "\t" + io::format_real(r.mode_means[0]) + "\t" +
           io::format_real(r.mode_means[1]) + "\n";
  }
  io::write_text(dir / "planted_regulons.tsv", reg);
  record("planted_regulons", "planted_regulons.tsv");

  std::vector<std::string> ids;
  std::vector<double> control, post;
  std::string pert = "example\tcontrol\tcell_type\tgenes\n";
  for (std::size_t i = 0; i < data.perturbations.size(); ++i) {
    const auto& ex = data.perturbations[i];
    ids.push_back(ex.id);
    control.insert(control.end(), ex.control.begin(), ex.control.end());
    post.insert(post.end(), ex.post.begin(), ex.post.end());
    pert += ex.id + "\t" + ex.control_id + "\t" + data.perturbation_cell_type[i] + "\t" + join_genes(ex.perturbed, vocab) + "\n";
  }
  save_matrix(ExpressionMatrix(ids, vocab.names(), std::move(control)), dir / "perturb_control.tsv");
  record("perturb_control", "perturb_control.tsv");
  save_matrix(ExpressionMatrix(ids, vocab.names(), std::move(post)), dir / "perturb_post.tsv");
  record("perturb_post", "perturb_post.tsv");
  io::write_text(dir / "perturbations.tsv", pert);
  record("perturbations", "perturbations.tsv");

  json doc;
  doc["generator_version"] = m.generator_version;
  doc["seed"] = m.seed;
  json files = json::array();
  for (const auto& f : m.files) files.push_back({{"role", f.role}, {"path", f.path}, {"checksum", f.checksum}});
  doc["files"] = files;
  json degrees = json::array();
  for (const Grn& g : data.planted) {
    const DegreeStats st = degree_stats(g, vocab);
    degrees.push_back({{"cell_type", g.owner()},
                       {"tf_mean_out_degree", st.tf_mean_out_degree},
                       {"non_tf_mean_degree", st.non_tf_mean_degree},
                       {"zero_edge_fraction", st.zero_edge_fraction}});
  }
  doc["planted_degrees"] = degrees;
  io::write_text(dir / "manifest.json", doc.dump(2) + "\n");
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& manifest_path) {
  json doc;
  try {
    doc = json::parse(io::read_text(manifest_path));
  } catch (const json::exception& e) {
    throw ParseError(manifest_path.string(), 0, e.what());
  }
  DatasetManifest m;
  try {
    m.generator_version = doc.at("generator_version").get<std::string>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& f : doc.at("files")) {
      m.files.push_back(ManifestFile{f.at("role").get<std::string>(), f.at("path").get<std::string>(),
                                     f.at("checksum").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  const auto dir = manifest_path.parent_path();
  for (const auto& f : m.files) {
    const auto path = dir / f.path;
    if (!std::filesystem::exists(path)) throw DataError("manifest file missing: " + path.string());
    if (io::file_checksum(path) != f.checksum) throw DataError("checksum mismatch for " + path.string());
  }
  return m;
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  LoadedDataset d;
  d.dir = dir;
  d.manifest = load_manifest(dir / "manifest.json");
  auto path = [&](const std::string& role) { return dir / d.manifest.file(role).path; };

  d.expression = load_matrix(path("expression"));
  std::vector<std::string> tfs;
  {
    io::LineReader in(path("tfs"));
    std::string line;
    while (in.next(line)) {
      if (!line.empty()) tfs.push_back(line);
    }
  }
  d.vocab = GeneVocabulary(d.expression.gene_ids(), tfs);
  load_coordinates(d.vocab, path("coordinates"));

  {
    io::LineReader in(path("cell_types"));
    std::string line;
    in.next(line);
    while (in.next(line)) {
      const auto f = io::split(line);
      if (f.size() != 2) throw ParseError(in.source(), in.line_number(), "expected cell and cell_type");
      d.cell_type_of[std::string(f[0])] = std::string(f[1]);
    }
  }
  {
    io::LineReader in(path("enhancers"));
    std::string line;
    in.next(line);
    while (in.next(line)) {
      const auto f = io::split(line);
      if (f.size() != 5) throw ParseError(in.source(), in.line_number(), "expected 5 enhancer fields");
      d.enhancers.push_back(EnhancerRecord{
          std::string(f[0]), d.vocab.index(std::string(f[1])),
          GenomicRegion{std::string(f[2]), io::parse_integer(f[3], in.source(), in.line_number()),
                        io::parse_integer(f[4], in.source(), in.line_number())}});
    }
  }
  {
    const ExpressionMatrix control = load_matrix(path("perturb_control"));
    const ExpressionMatrix post = load_matrix(path("perturb_post"));
    io::LineReader in(path("perturbations"));
    std::string line;
    in.next(line);
    std::size_t row = 0;
    while (in.next(line)) {
      const auto f = io::split(line);
      if (f.size() != 4) throw ParseError(in.source(), in.line_number(), "expected example, control, cell_type, genes");
      PerturbationExample ex;
      ex.id = std::string(f[0]);
      ex.control_id = std::string(f[1]);
      if (row >= control.num_cells() || control.cell_ids()[row] != ex.id || post.cell_ids()[row] != ex.id) {
        throw ParseError(in.source(), in.line_number(), "example order differs from the perturbation matrices");
      }
      ex.control.assign(control.cell(row).begin(), control.cell(row).end());
      ex.post.assign(post.cell(row).begin(), post.cell(row).end());
      for (auto name : io::split(f[3], ',')) {
        if (!name.empty()) ex.perturbed.push_back(d.vocab.index(std::string(name)));
      }
      d.perturbations.push_back(std::move(ex));
      ++row;
    }
  }
  return d;
}

}  // namespace grnfuse
