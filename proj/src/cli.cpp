// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "grnfuse/analysis.hpp"
#include "grnfuse/config.hpp"
#include "grnfuse/errors.hpp"
#include "grnfuse/io.hpp"
#include "grnfuse/pipeline.hpp"

namespace grnfuse {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<std::size_t> workers;
  std::string data_dir;
  std::string grn_dir;
  std::string checkpoint;
};

void add_common(CLI::App& cmd, CommonFlags& f) {
  cmd.add_option("--config", f.config, "run configuration (JSON)");
  cmd.add_option("--seed", f.seed, "overrides the config seed");
  cmd.add_option("--out-dir", f.out_dir, "output directory")->capture_default_str();
  cmd.add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
}

RunConfig resolve_config(const CommonFlags& f) {
  std::optional<json> doc;
  RunConfig cfg;
  if (!f.config.empty()) {
    if (!fs::exists(f.config)) throw ConfigError("config file not found: " + f.config);
    try {
      doc = json::parse(io::read_text(f.config));
    } catch (const json::parse_error& e) {
      throw ConfigError("cannot parse config " + f.config + ": " + e.what());
    }
    cfg = run_config_from_json(*doc);
  }
  cfg.seed = resolve_seed(f.seed, doc);
  if (f.workers) cfg.workers = *f.workers;
  cfg.propagate();
  return cfg;
}

fs::path out_dir(const CommonFlags& f) {
  fs::create_directories(f.out_dir);
  return f.out_dir;
}

fs::path data_dir(const CommonFlags& f) { return f.data_dir.empty() ? fs::path(f.out_dir) : fs::path(f.data_dir); }
fs::path grn_dir(const CommonFlags& f) { return f.grn_dir.empty() ? fs::path(f.out_dir) : fs::path(f.grn_dir); }
fs::path checkpoint_path(const CommonFlags& f) {
  return f.checkpoint.empty() ? fs::path(f.out_dir) / "checkpoint.json" : fs::path(f.checkpoint);
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw DataError(std::string(what) + " not found: " + p.string());
}

// Cells whose regulons were all inactive have no rows in grn_cell.tsv and
// get an empty graph back.
GrnLookup load_lookup(const LoadedDataset& data, const fs::path& dir) {
  require_file(dir / "grn_celltype.tsv", "cell-type GRN");
  require_file(dir / "grn_cell.tsv", "cell GRN");
  const auto types = load_edge_list(dir / "grn_celltype.tsv", data.vocab);
  const auto loaded = load_edge_list(dir / "grn_cell.tsv", data.vocab);
  std::map<std::string, const Grn*> by_cell;
  for (const Grn& g : loaded) by_cell[g.owner()] = &g;
  std::vector<Grn> cells;
  for (const auto& id : data.expression.cell_ids()) {
    auto it = by_cell.find(id);
    cells.push_back(it != by_cell.end() ? *it->second : Grn(GrnScale::kCell, id, data.vocab.size(), {}));
  }
  return make_lookup(types, cells, data.cell_type_of);
}

void write_json(const fs::path& path, const json& doc) { io::write_text(path, doc.dump(2) + "\n"); }

int cmd_synth(const CommonFlags& f, std::ostream& out) {
  const RunConfig cfg = resolve_config(f);
  const SyntheticDataset data = gen_synthetic(cfg.synthetic);
  const fs::path dir = out_dir(f);
  const DatasetManifest manifest = write_synthetic(data, dir);
  write_json(dir / "run_config.json", to_json(cfg));
  out << "synth: " << data.expression.num_cells() << " cells x " << data.vocab.size() << " genes, "
      << data.perturbations.size() << " perturbations -> " << (dir / "manifest.json").string() << "\n";
  return kExitOk;
}

int cmd_build_grn(const CommonFlags& f, std::ostream& out) {
  const RunConfig cfg = resolve_config(f);
  const LoadedDataset data = load_dataset(data_dir(f));
  const auto grns = build_cell_type_grns(data.expression, data.cell_type_of, data.enhancers, data.vocab, cfg.linking);
  const fs::path dir = out_dir(f);
  save_edge_list(grns, data.vocab, dir / "grn_celltype.tsv");
  for (const Grn& g : grns) {
    const DegreeStats s = degree_stats(g, data.vocab);
    out << "build-grn: " << g.owner() << " edges=" << g.num_edges() << " tf_out_degree=" << s.tf_mean_out_degree
        << " non_tf_degree=" << s.non_tf_mean_degree << " isolated=" << s.zero_edge_fraction << "\n";
  }
  return kExitOk;
}

int cmd_activity(const CommonFlags& f, std::ostream& out) {
  const RunConfig cfg = resolve_config(f);
  const LoadedDataset data = load_dataset(data_dir(f));
  const fs::path in = grn_dir(f) / "grn_celltype.tsv";
  require_file(in, "cell-type GRN");
  const auto types = load_edge_list(in, data.vocab);
  const CellGrnResult res = infer_cell_grns(data.expression, data.cell_type_of, types, data.vocab, cfg.activity);
  const fs::path dir = out_dir(f);
  save_activity_report(res.activity, dir / "activity.tsv");
  save_threshold_report(res.thresholds, dir / "thresholds.json");
  save_edge_list(res.cell_grns, data.vocab, dir / "grn_cell.tsv");
  const auto bimodal = std::count_if(res.thresholds.begin(), res.thresholds.end(), [](const ThresholdRecord& r) {
    return r.decision.classification == Modality::kBimodal;
  });
  std::size_t edges = 0;
  for (const Grn& g : res.cell_grns) edges += g.num_edges();
  out << "activity: " << res.thresholds.size() << " regulon thresholds (" << bimodal << " bimodal), mean cell GRN "
      << static_cast<double>(edges) / static_cast<double>(std::max<std::size_t>(1, res.cell_grns.size()))
      << " edges\n";
  return kExitOk;
}

int cmd_pretrain(const CommonFlags& f, const std::string& resume, std::size_t every, std::ostream& out) {
  const RunConfig cfg = resolve_config(f);
  const LoadedDataset data = load_dataset(data_dir(f));
  const GrnLookup lookup = load_lookup(data, grn_dir(f));
  const fs::path dir = out_dir(f);
  TrainState state = TrainState::fresh(data.vocab.size(), cfg.train);
  if (!resume.empty()) {
    require_file(resume, "checkpoint");
    load_checkpoint(state, resume);
    out << "pretrain: resumed at step " << state.step << "\n";
  }
  pretrain(data.expression, lookup, cfg.train, state, [&](TrainState& s) {
    if (s.step % 10 == 0 || s.step == cfg.train.steps) {
      out << "pretrain: step " << s.step << " loss " << s.losses.back() << "\n";
    }
    if (every > 0 && s.step % every == 0 && s.step != cfg.train.steps) {
      save_checkpoint(s, cfg.train, dir / ("checkpoint_step" + std::to_string(s.step) + ".json"));
    }
  });
  save_checkpoint(state, cfg.train, dir / "checkpoint.json");
  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < state.losses.size(); ++i) {
    csv += std::to_string(i + 1) + "," + io::format_real(state.losses[i]) + "\n";
  }
  io::write_text(dir / "loss.csv", csv);
  return kExitOk;
}

Grn union_graph(const std::map<std::string, Grn>& grns, std::size_t genes) {
  std::map<std::pair<GeneIndex, GeneIndex>, double> weight;
  for (const auto& [type, g] : grns) {
    for (const Edge& e : g.edges()) {
      double& w = weight[{e.source, e.target}];
      w = std::max(w, e.weight);
    }
  }
  std::vector<Edge> edges;
  for (const auto& [key, w] : weight) edges.push_back(Edge{key.first, key.second, w, false});
  return Grn(GrnScale::kCellType, "union", genes, std::move(edges));
}

int cmd_analyze(const CommonFlags& f, std::ostream& out) {
  const RunConfig cfg = resolve_config(f);
  const LoadedDataset data = load_dataset(data_dir(f));
  const GrnLookup lookup = load_lookup(data, grn_dir(f));
  require_file(checkpoint_path(f), "checkpoint");
  TrainState state = restore_train_state(checkpoint_path(f));
  const fs::path dir = out_dir(f);
  const std::size_t count = std::min(cfg.analysis.eval_cells, data.expression.num_cells());

  std::map<std::string, ImportanceAccumulator> per_type;
  std::size_t dumped = 0;
  const AttentionScan scan = scan_attention(
      state.model, data.expression, lookup, data.vocab, count, cfg.seed,
      [&](std::size_t c, std::span<const GeneIndex> genes, std::span<const Tensor> attention) {
        const std::string& id = data.expression.cell_ids()[c];
        per_type.try_emplace(data.cell_type_of.at(id), data.vocab.size())
            .first->second.add(genes, attention_importance(attention));
        if (dumped < cfg.analysis.dump_cells) {
          save_attention_dump(attention, genes, data.vocab, id, dir / "attention");
          ++dumped;
        }
      });
  save_attention_report(scan.corpus, data.vocab, dir / "attention_report.json");
  const auto rows = degree_attention_join(union_graph(lookup.cell_type_grns(), data.vocab.size()), scan.corpus,
                                          data.vocab);
  save_degree_attention(rows, data.vocab, dir / "degree_attention.tsv");

  std::vector<MetricRecord> metrics{{"tf_enrichment_ratio", "all", scan.corpus.rho, scan.cells.size()}};
  for (const auto& [type, acc] : per_type) {
    const AttentionReport r = acc.report(data.vocab.tf_mask(), state.model.fusion.heads, type);
    metrics.push_back({"tf_enrichment_ratio", type, r.rho, acc.cells()});
  }
  save_metrics(metrics, dir / "analysis_metrics.csv");
  out << "analyze: rho=" << scan.corpus.rho << " over " << scan.cells.size() << " cells\n";
  return kExitOk;
}

int cmd_eval(const CommonFlags& f, bool with_ablation, std::ostream& out) {
  const RunConfig cfg = resolve_config(f);
  const LoadedDataset data = load_dataset(data_dir(f));
  const GrnLookup base = load_lookup(data, grn_dir(f));
  require_file(checkpoint_path(f), "checkpoint");
  TrainState state = restore_train_state(checkpoint_path(f));
  const fs::path dir = out_dir(f);

  std::vector<PerturbationExample> examples = data.perturbations;
  if (examples.empty()) throw DataError("dataset has no perturbation examples");
  map_examples_to_reference(state.model, examples, data.expression, cfg.eval.mapping);
  const ExampleSplit split = split_examples(examples, cfg.eval.holdout_every);

  std::vector<std::pair<std::string, FinetuneConfig>> runs{{"configured", cfg.eval.finetune}};
  if (with_ablation) {
    FinetuneConfig ablated = cfg.eval.finetune;
    ablated.alpha = 0.0;
    ablated.beta = 0.0;
    runs.emplace_back("ablated", ablated);
  }
  std::vector<MetricRecord> metrics;
  for (const auto& [group, fc] : runs) {
    const PerturbationEval ev = evaluate_perturbation(state.model, split, base, fc);
    metrics.push_back({"pcc_delta", group, ev.mean_pcc, ev.pcc.size()});
    metrics.push_back({"roc_auc", group, ev.mean_auc, ev.auc.size()});
    metrics.push_back({"finetune_final_loss", group, ev.finetune_losses.empty() ? 0.0 : ev.finetune_losses.back(),
                       ev.finetune_losses.size()});
    out << "eval: " << group << " pcc_delta=" << ev.mean_pcc << " roc_auc=" << ev.mean_auc << " over "
        << ev.pcc.size() << " held-out examples\n";
  }
  save_metrics(metrics, dir / "metrics.csv");
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"grnfuse: multi-scale GRN fusion for a toy masked-expression transformer"};
  app.require_subcommand(1);
  CommonFlags f;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(*synth, f);

  auto* build = app.add_subcommand("build-grn", "link eRegulons into cell-type GRNs");
  add_common(*build, f);
  build->add_option("--data", f.data_dir, "dataset directory (default: out-dir)");

  auto* activity = app.add_subcommand("activity", "AUCell thresholds and cell-specific GRNs");
  add_common(*activity, f);
  activity->add_option("--data", f.data_dir, "dataset directory (default: out-dir)");
  activity->add_option("--grn-dir", f.grn_dir, "directory holding grn_celltype.tsv (default: out-dir)");

  std::string resume;
  std::size_t every = 0;
  auto* pre = app.add_subcommand("pretrain", "masked-expression pretraining with GRN fusion");
  add_common(*pre, f);
  pre->add_option("--data", f.data_dir, "dataset directory (default: out-dir)");
  pre->add_option("--grn-dir", f.grn_dir, "directory holding both GRN files (default: out-dir)");
  pre->add_option("--resume", resume, "checkpoint to continue from");
  pre->add_option("--checkpoint-every", every, "also save a checkpoint every N steps");

  auto* analyze = app.add_subcommand("analyze", "fusion attention importance and TF enrichment");
  add_common(*analyze, f);
  analyze->add_option("--data", f.data_dir, "dataset directory (default: out-dir)");
  analyze->add_option("--grn-dir", f.grn_dir, "directory holding both GRN files (default: out-dir)");
  analyze->add_option("--checkpoint", f.checkpoint, "checkpoint (default: out-dir/checkpoint.json)");

  bool ablation = false;
  auto* eval = app.add_subcommand("eval", "perturbation fine-tune and held-out metrics");
  add_common(*eval, f);
  eval->add_option("--data", f.data_dir, "dataset directory (default: out-dir)");
  eval->add_option("--grn-dir", f.grn_dir, "directory holding both GRN files (default: out-dir)");
  eval->add_option("--checkpoint", f.checkpoint, "checkpoint (default: out-dir/checkpoint.json)");
  eval->add_flag("--with-ablation", ablation, "also run alpha=0, beta=0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(f, out);
    if (build->parsed()) return cmd_build_grn(f, out);
    if (activity->parsed()) return cmd_activity(f, out);
    if (pre->parsed()) return cmd_pretrain(f, resume, every, out);
    if (analyze->parsed()) return cmd_analyze(f, out);
    if (eval->parsed()) return cmd_eval(f, ablation, out);
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace grnfuse
