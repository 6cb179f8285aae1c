// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/trainer.hpp"

#include <algorithm>
#include <exception>
#include <memory>
#include <thread>

#include "grnfuse/errors.hpp"

namespace grnfuse {

namespace {

// Calls fn(i) for i in [0, n) on up to `workers` threads. Exceptions are
// rethrown in index order after all threads finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += threads) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct CellPass {
  std::unique_ptr<Tape> tape;
  double loss = 0.0;
};

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ContractError("alpha must lie in [0, 1)");
  if (batch_size == 0) throw ContractError("batch size must be positive");
  model.validate();
}

void GrnLookup::add_cell_type_grn(const std::string& cell_type, Grn grn) { type_grns_[cell_type] = std::move(grn); }

void GrnLookup::add_cell_grn(const std::string& cell, Grn grn) { cell_grns_[cell] = std::move(grn); }

void GrnLookup::assign_type(const std::string& cell, const std::string& cell_type) { cell_type_[cell] = cell_type; }

void GrnLookup::alias(const std::string& cell, const std::string& reference_cell) { alias_[cell] = reference_cell; }

std::pair<const Grn*, const Grn*> GrnLookup::resolve(const std::string& cell) const {
  std::string key = cell;
  if (auto a = alias_.find(cell); a != alias_.end()) key = a->second;
  const auto c = cell_grns_.find(key);
  const auto t = cell_type_.find(key);
  const Grn* type_grn = nullptr;
  if (t != cell_type_.end()) {
    if (auto g = type_grns_.find(t->second); g != type_grns_.end()) type_grn = &g->second;
  }
  if (c == cell_grns_.end() || type_grn == nullptr) {
    throw DataError("no GRN pair resolvable for cell '" + cell + "'");
  }
  return {&c->second, type_grn};
}

TrainState TrainState::fresh(std::size_t vocabulary_size, const TrainConfig& config) {
  config.validate();
  return TrainState{StructureAwareModel::init(vocabulary_size, config.model, config.seed), Adam(config.adam), 0, {}};
}

std::vector<std::size_t> batch_for_step(std::size_t num_cells, std::size_t batch_size, std::uint64_t seed,
                                        std::uint64_t step) {
  if (num_cells == 0 || batch_size == 0) throw ContractError("batch_for_step needs cells and a positive batch size");
  std::vector<std::size_t> batch;
  std::vector<std::size_t> perm;
  std::uint64_t perm_epoch = ~0ULL;
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::uint64_t position = step * batch_size + i;
    const std::uint64_t epoch = position / num_cells;
    if (epoch != perm_epoch) {
      perm.resize(num_cells);
      for (std::size_t c = 0; c < num_cells; ++c) perm[c] = c;
      Rng rng = make_rng({seed, tag(Stream::kBatch), epoch});
      for (std::size_t c = num_cells - 1; c > 0; --c) std::swap(perm[c], perm[uniform_index(rng, c + 1)]);
      perm_epoch = epoch;
    }
    batch.push_back(perm[position % num_cells]);
  }
  return batch;
}

double pretrain_step(const ExpressionMatrix& expression, std::span<const std::size_t> batch, const GrnLookup& grns,
                     TrainState& state, const TrainConfig& config) {
  if (batch.empty()) throw ContractError("pretrain_step: empty batch");
  if (expression.num_genes() != state.model.vocabulary_size) {
    throw ShapeError("expression matrix genes do not match the model vocabulary");
  }
  const ForwardOptions options{config.alpha, config.beta, config.use_structure, false};
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  std::vector<CellPass> passes(batch.size());

  parallel_for(batch.size(), config.workers, [&](std::size_t i) {
    const std::size_t c = batch[i];
    const std::string& cell_id = expression.cell_ids().at(c);
    CellInput input{expression.cell(c), nullptr, nullptr, {}};
    if (config.use_structure) std::tie(input.cell_grn, input.type_grn) = grns.resolve(cell_id);
    const TokenSequence tokens = tokenize_cell(input.expression, config.model.backbone);
    if (tokens.empty()) throw DataError("cell '" + cell_id + "' has no expressed genes");
    const PassKey key{config.seed, kPhasePretrain, state.step, c};
    Rng mask_rng = key.stream(Stream::kMask);
    const auto [masked, mask] = apply_mask(tokens, config.model.backbone.mask_ratio, mask_rng);

    auto tape = std::make_unique<Tape>();
    const ForwardResult out = forward_cell(*tape, state.model, masked, input, options, key);
    const Var loss = masked_mse_loss(out.predictions, mask);
    passes[i].loss = loss.value().item();
    tape->backward_leaves(scale(loss, inv_batch));
    passes[i].tape = std::move(tape);
  });

  double total = 0.0;
  for (CellPass& p : passes) {
    p.tape->flush_gradients();
    total += p.loss;
  }
  const auto params = state.model.parameters();
  state.optimizer.step(params);
  ++state.step;
  const double mean_loss = total * inv_batch;
  state.losses.push_back(mean_loss);
  return mean_loss;
}

void pretrain(const ExpressionMatrix& expression, const GrnLookup& grns, const TrainConfig& config, TrainState& state,
              const std::function<void(TrainState&)>& on_step) {
  config.validate();
  if (expression.num_cells() == 0) throw ContractError("pretrain: empty dataset");
  while (state.step < config.steps) {
    const auto batch = batch_for_step(expression.num_cells(), config.batch_size, config.seed, state.step);
    pretrain_step(expression, batch, grns, state, config);
    if (on_step) on_step(state);
  }
}

TokenSequence tokenize_perturbation(std::span<const double> control, std::span<const GeneIndex> flagged,
                                    const BackboneConfig& config) {
  TokenSequence tokens = tokenize_cell(control, config);
  for (GeneIndex g : flagged) {
    if (g >= control.size()) throw LookupError("perturbed gene index " + std::to_string(g) + " outside vocabulary");
    const bool present = std::any_of(tokens.begin(), tokens.end(), [g](const Token& t) { return t.gene == g; });
    if (!present) tokens.push_back(Token{g, 0.0});
  }
  return tokens;
}

namespace {

void check_example(const PerturbationExample& ex, std::size_t genes) {
  if (ex.control.size() != genes || ex.post.size() != genes) {
    throw ShapeError("perturbation example '" + ex.id + "' does not match the vocabulary size");
  }
  for (GeneIndex g : ex.perturbed) {
    if (g >= genes) throw LookupError("example '" + ex.id + "' perturbs unknown gene index " + std::to_string(g));
  }
}

ForwardResult perturbation_forward(Tape& tape, StructureAwareModel& model, const PerturbationExample& ex,
                                   const TokenSequence& tokens, const GrnLookup& grns, const ForwardOptions& options,
                                   const PassKey& key) {
  CellInput input{ex.control, nullptr, nullptr, ex.perturbed};
  if (options.use_structure) std::tie(input.cell_grn, input.type_grn) = grns.resolve(ex.grn_cell);
  return forward_cell(tape, model, tokens, input, options, key);
}

}  // namespace

std::vector<double> finetune_perturbation(StructureAwareModel& model, std::span<const PerturbationExample> examples,
                                          const GrnLookup& grns, const FinetuneConfig& config) {
  if (examples.empty() && config.steps > 0) throw ContractError("finetune_perturbation: no examples");
  for (const auto& ex : examples) check_example(ex, model.vocabulary_size);
  std::vector<Parameter*> trainable;
  if (config.freeze_backbone) {
    trainable = model.structure_parameters();
    for (Parameter* p : model.decoder.parameters()) trainable.push_back(p);
    trainable.push_back(&model.perturbation_flag);
  } else {
    trainable = model.parameters();
  }
  Adam optimizer(config.adam);
  const ForwardOptions options{config.alpha, config.beta, config.use_structure, false};
  const std::uint64_t batch_seed = mix_seed({config.seed, tag(Stream::kFinetune)});
  std::vector<double> losses;

  for (std::uint64_t step = 0; step < config.steps; ++step) {
    const auto batch = batch_for_step(examples.size(), config.batch_size, batch_seed, step);
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    std::vector<CellPass> passes(batch.size());
    parallel_for(batch.size(), config.workers, [&](std::size_t i) {
      const PerturbationExample& ex = examples[batch[i]];
      const TokenSequence tokens = tokenize_perturbation(ex.control, ex.perturbed, model.config.backbone);
      if (tokens.empty()) throw DataError("example '" + ex.id + "' has no tokens");
      std::vector<double> target;
      for (const Token& t : tokens) target.push_back(ex.post[t.gene]);
      auto tape = std::make_unique<Tape>();
      const PassKey key{config.seed, kPhaseFinetune, step, batch[i]};
      const ForwardResult out = perturbation_forward(*tape, model, ex, tokens, grns, options, key);
      const Var diff = out.predictions - tape->constant(Tensor::column(target));
      const Var loss = scale(sum(mul(diff, diff)), 1.0 / static_cast<double>(tokens.size()));
      passes[i].loss = loss.value().item();
      tape->backward_leaves(scale(loss, inv_batch));
      passes[i].tape = std::move(tape);
    });
    double total = 0.0;
    for (CellPass& p : passes) {
      p.tape->flush_gradients();
      total += p.loss;
    }
    optimizer.step(trainable);
    if (config.freeze_backbone) {
      for (Parameter* p : model.parameters()) p->zero_grad();
    }
    losses.push_back(total * inv_batch);
  }
  return losses;
}

std::vector<double> predict_perturbation(StructureAwareModel& model, const PerturbationExample& example,
                                         const GrnLookup& grns, const FinetuneConfig& config) {
  check_example(example, model.vocabulary_size);
  const TokenSequence tokens = tokenize_perturbation(example.control, example.perturbed, model.config.backbone);
  std::vector<double> prediction = example.control;
  if (tokens.empty()) return prediction;
  Tape tape;
  const ForwardOptions options{0.0, config.beta, config.use_structure, false};
  const PassKey key{config.seed, kPhaseAnalysis, 0, 0};
  const ForwardResult out = perturbation_forward(tape, model, example, tokens, grns, options, key);
  for (std::size_t i = 0; i < tokens.size(); ++i) prediction[tokens[i].gene] = out.predictions.value()(i, 0);
  return prediction;
}

}  // namespace grnfuse
