// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/config.hpp"

#include <cstdlib>
#include <set>

#include "grnfuse/errors.hpp"
#include "grnfuse/io.hpp"

namespace grnfuse {

namespace {

using nlohmann::json;

// Reads fields of one JSON object and rejects any key it was not asked for.
class Strict {
 public:
  Strict(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError(where_ + "." + key + ": expected a boolean");
        out = it->get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_unsigned()) throw ConfigError(where_ + "." + key + ": expected a non-negative integer");
        out = it->get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError(where_ + "." + key + ": expected a number");
        out = it->get<T>();
      } else {
        if (!it->is_string()) throw ConfigError(where_ + "." + key + ": expected a string");
        out = it->get<T>();
      }
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

json model_json(const ModelConfig& m) {
  return {{"hidden", m.backbone.hidden},
          {"layers", m.backbone.layers},
          {"heads", m.backbone.heads},
          {"feed_forward", m.backbone.feed_forward},
          {"mask_ratio", m.backbone.mask_ratio},
          {"max_genes", m.backbone.max_genes},
          {"sage_layers", m.sage.layers},
          {"sage_sample_size", m.sage.sample_size},
          {"sage_with_replacement", m.sage.with_replacement},
          {"sage_activation", m.sage.activation == Activation::kRelu ? "relu" : "identity"},
          {"fusion_heads", m.fusion_heads}};
}

void read_model(const json& doc, ModelConfig& m) {
  Strict s(doc, "train.model");
  s.read("hidden", m.backbone.hidden);
  s.read("layers", m.backbone.layers);
  s.read("heads", m.backbone.heads);
  s.read("feed_forward", m.backbone.feed_forward);
  s.read("mask_ratio", m.backbone.mask_ratio);
  s.read("max_genes", m.backbone.max_genes);
  s.read("sage_layers", m.sage.layers);
  s.read("sage_sample_size", m.sage.sample_size);
  s.read("sage_with_replacement", m.sage.with_replacement);
  std::string act = m.sage.activation == Activation::kRelu ? "relu" : "identity";
  s.read("sage_activation", act);
  if (act == "relu") {
    m.sage.activation = Activation::kRelu;
  } else if (act == "identity") {
    m.sage.activation = Activation::kIdentity;
  } else {
    throw ConfigError("train.model.sage_activation: expected 'relu' or 'identity'");
  }
  s.read("fusion_heads", m.fusion_heads);
  s.finish();
}

json adam_json(const AdamConfig& a) {
  return {{"learning_rate", a.learning_rate}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"epsilon", a.epsilon}};
}

void read_adam(Strict& s, AdamConfig& a) {
  s.read("learning_rate", a.learning_rate);
  s.read("beta1", a.beta1);
  s.read("beta2", a.beta2);
  s.read("epsilon", a.epsilon);
}

void read_train_fields(Strict& s, TrainConfig& t) {
  s.read("alpha", t.alpha);
  s.read("beta", t.beta);
  s.read("batch_size", t.batch_size);
  s.read("steps", t.steps);
  s.read("use_structure", t.use_structure);
  read_adam(s, t.adam);
  if (const json* m = s.child("model")) read_model(*m, t.model);
}

}  // namespace

void RunConfig::propagate() {
  synthetic.seed = seed;
  activity.seed = seed;
  train.seed = seed;
  train.workers = workers;
  eval.finetune.seed = seed;
  eval.finetune.workers = workers;
}

json to_json(const TrainConfig& t) {
  json j = adam_json(t.adam);
  j["alpha"] = t.alpha;
  j["beta"] = t.beta;
  j["batch_size"] = t.batch_size;
  j["steps"] = t.steps;
  j["use_structure"] = t.use_structure;
  j["model"] = model_json(t.model);
  j["seed"] = t.seed;
  return j;
}

TrainConfig train_config_from_json(const json& doc) {
  TrainConfig t;
  Strict s(doc, "train");
  read_train_fields(s, t);
  s.read("seed", t.seed);
  s.finish();
  return t;
}

json to_json(const RunConfig& c) {
  const auto& sy = c.synthetic;
  json train = to_json(c.train);
  train.erase("seed");
  const auto& f = c.eval.finetune;
  json finetune = adam_json(f.adam);
  finetune.update({{"steps", f.steps},
                   {"batch_size", f.batch_size},
                   {"alpha", f.alpha},
                   {"beta", f.beta},
                   {"use_structure", f.use_structure},
                   {"freeze_backbone", f.freeze_backbone},
                   {"holdout_every", c.eval.holdout_every},
                   {"mapping", c.eval.mapping == MappingSpace::kExpression ? "expression" : "backbone"}});
  return {{"seed", c.seed},
          {"workers", c.workers},
          {"synthetic",
           {{"cells", sy.cells},
            {"genes", sy.genes},
            {"tfs", sy.tfs},
            {"cell_types", sy.cell_types},
            {"targets_per_tf", sy.targets_per_tf},
            {"bimodal_fraction", sy.bimodal_fraction},
            {"noise", sy.noise},
            {"regulon_presence", sy.regulon_presence},
            {"regulated_fraction", sy.regulated_fraction},
            {"dropout", sy.dropout},
            {"perturb_controls_per_type", sy.perturb_controls_per_type},
            {"perturbations_per_control", sy.perturbations_per_control},
            {"perturb_effect", sy.perturb_effect}}},
          {"linking", {{"proximity_kb", c.linking.proximity_kb}, {"corr_floor", c.linking.corr_floor}}},
          {"activity",
           {{"top_fraction", c.activity.top_fraction},
            {"gmm_restarts", c.activity.gmm.restarts},
            {"gmm_tolerance", c.activity.gmm.tolerance},
            {"gmm_max_iterations", c.activity.gmm.max_iterations},
            {"variance_floor", c.activity.gmm.variance_floor},
            {"min_weight", c.activity.rule.min_weight},
            {"separation", c.activity.rule.separation}}},
          {"train", train},
          {"finetune", finetune},
          {"analysis", {{"eval_cells", c.analysis.eval_cells}, {"dump_cells", c.analysis.dump_cells}}}};
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig c;
  Strict root(doc, "config");
  root.read("seed", c.seed);
  root.read("workers", c.workers);
  if (const json* j = root.child("synthetic")) {
    Strict s(*j, "synthetic");
    auto& sy = c.synthetic;
    s.read("cells", sy.cells);
    s.read("genes", sy.genes);
    s.read("tfs", sy.tfs);
    s.read("cell_types", sy.cell_types);
    s.read("targets_per_tf", sy.targets_per_tf);
    s.read("bimodal_fraction", sy.bimodal_fraction);
    s.read("noise", sy.noise);
    s.read("regulon_presence", sy.regulon_presence);
    s.read("regulated_fraction", sy.regulated_fraction);
    s.read("dropout", sy.dropout);
    s.read("perturb_controls_per_type", sy.perturb_controls_per_type);
    s.read("perturbations_per_control", sy.perturbations_per_control);
    s.read("perturb_effect", sy.perturb_effect);
    s.finish();
  }
  if (const json* j = root.child("linking")) {
    Strict s(*j, "linking");
    s.read("proximity_kb", c.linking.proximity_kb);
    s.read("corr_floor", c.linking.corr_floor);
    s.finish();
  }
  if (const json* j = root.child("activity")) {
    Strict s(*j, "activity");
    s.read("top_fraction", c.activity.top_fraction);
    s.read("gmm_restarts", c.activity.gmm.restarts);
    s.read("gmm_tolerance", c.activity.gmm.tolerance);
    s.read("gmm_max_iterations", c.activity.gmm.max_iterations);
    s.read("variance_floor", c.activity.gmm.variance_floor);
    s.read("min_weight", c.activity.rule.min_weight);
    s.read("separation", c.activity.rule.separation);
    s.finish();
  }
  if (const json* j = root.child("train")) {
    Strict s(*j, "train");
    read_train_fields(s, c.train);
    s.finish();
  }
  if (const json* j = root.child("finetune")) {
    Strict s(*j, "finetune");
    auto& f = c.eval.finetune;
    s.read("steps", f.steps);
    s.read("batch_size", f.batch_size);
    s.read("alpha", f.alpha);
    s.read("beta", f.beta);
    s.read("use_structure", f.use_structure);
    s.read("freeze_backbone", f.freeze_backbone);
    read_adam(s, f.adam);
    s.read("holdout_every", c.eval.holdout_every);
    std::string mapping = c.eval.mapping == MappingSpace::kExpression ? "expression" : "backbone";
    s.read("mapping", mapping);
    if (mapping == "expression") {
      c.eval.mapping = MappingSpace::kExpression;
    } else if (mapping == "backbone") {
      c.eval.mapping = MappingSpace::kBackbone;
    } else {
      throw ConfigError("finetune.mapping: expected 'expression' or 'backbone'");
    }
    s.finish();
  }
  if (const json* j = root.child("analysis")) {
    Strict s(*j, "analysis");
    s.read("eval_cells", c.analysis.eval_cells);
    s.read("dump_cells", c.analysis.dump_cells);
    s.finish();
  }
  root.finish();
  c.propagate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  json doc;
  try {
    doc = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(doc);
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const std::optional<json>& config_doc) {
  if (flag) return *flag;
  if (config_doc && config_doc->is_object() && config_doc->contains("seed")) {
    const auto& s = (*config_doc)["seed"];
    if (!s.is_number_unsigned()) throw ConfigError("config.seed: expected a non-negative integer");
    return s.get<std::uint64_t>();
  }
  if (const char* env = std::getenv("GRNFORMER_SEED")) {
    const std::string text(env);
    try {
      return static_cast<std::uint64_t>(io::parse_integer(text, "GRNFORMER_SEED", 0));
    } catch (const ParseError&) {
      throw ConfigError("GRNFORMER_SEED is not an integer: '" + text + "'");
    }
  }
  return 0;
}

}  // namespace grnfuse
