// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include "grnfuse/config.hpp"
#include "grnfuse/errors.hpp"
#include "grnfuse/io.hpp"
#include "grnfuse/trainer.hpp"

namespace grnfuse {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "grnfuse-checkpoint";
constexpr int kVersion = 1;

json tensor_json(const Tensor& t) { return {{"rows", t.rows()}, {"cols", t.cols()}, {"values", t.values()}}; }

Tensor tensor_from(const json& j, const std::string& what) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != rows * cols) throw DataError("checkpoint tensor '" + what + "' has the wrong value count");
  return Tensor(rows, cols, std::move(values));
}

json read_document(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  if (doc.value("format", "") != kFormat || doc.value("version", 0) != kVersion) {
    throw DataError(path.string() + " is not a version " + std::to_string(kVersion) + " checkpoint");
  }
  return doc;
}

}  // namespace

void save_checkpoint(TrainState& state, const TrainConfig& config, const std::filesystem::path& path) {
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["seed"] = config.seed;
  doc["step"] = state.step;
  doc["vocabulary_size"] = state.model.vocabulary_size;
  doc["config"] = to_json(config);
  doc["losses"] = state.losses;
  json params = json::array();
  for (Parameter* p : state.model.parameters()) {
    json entry = tensor_json(p->value);
    entry["name"] = p->name;
    params.push_back(std::move(entry));
  }
  doc["parameters"] = std::move(params);
  json m = json::array(), v = json::array();
  for (const Tensor& t : state.optimizer.first_moments()) m.push_back(tensor_json(t));
  for (const Tensor& t : state.optimizer.second_moments()) v.push_back(tensor_json(t));
  doc["optimizer"] = {{"step", state.optimizer.step_count()}, {"m", std::move(m)}, {"v", std::move(v)}};
  io::write_text(path, doc.dump() + "\n");
}

void load_checkpoint(TrainState& state, const std::filesystem::path& path) {
  const json doc = read_document(path);
  try {
    const auto params = state.model.parameters();
    const auto& saved = doc.at("parameters");
    if (saved.size() != params.size()) {
      throw DataError("checkpoint holds " + std::to_string(saved.size()) + " parameters, model has " +
                      std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto name = saved[i].at("name").get<std::string>();
      if (name != params[i]->name) throw DataError("checkpoint parameter " + name + " where " + params[i]->name + " expected");
      Tensor value = tensor_from(saved[i], name);
      if (!value.same_shape(params[i]->value)) {
        throw ShapeError("checkpoint parameter " + name + " is " + shape_string(value) + ", model expects " +
                         shape_string(params[i]->value));
      }
      params[i]->value = std::move(value);
      params[i]->zero_grad();
    }
    const auto& opt = doc.at("optimizer");
    std::vector<Tensor> m, v;
    for (const auto& t : opt.at("m")) m.push_back(tensor_from(t, "optimizer.m"));
    for (const auto& t : opt.at("v")) v.push_back(tensor_from(t, "optimizer.v"));
    state.optimizer.restore(opt.at("step").get<std::uint64_t>(), std::move(m), std::move(v));
    state.step = doc.at("step").get<std::uint64_t>();
    state.losses = doc.at("losses").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

TrainConfig checkpoint_config(const std::filesystem::path& path) {
  return train_config_from_json(read_document(path).at("config"));
}

TrainState restore_train_state(const std::filesystem::path& path) {
  const json doc = read_document(path);
  TrainConfig config = train_config_from_json(doc.at("config"));
  TrainState state = TrainState::fresh(doc.at("vocabulary_size").get<std::size_t>(), config);
  load_checkpoint(state, path);
  return state;
}

}  // namespace grnfuse
