// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/optim.hpp"

#include <cmath>

#include "grnfuse/errors.hpp"

namespace grnfuse {

Adam::Adam(AdamConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw ContractError("Adam learning rate must be positive");
}

void Adam::step(std::span<Parameter* const> params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (m_.size() != params.size()) {
    throw ContractError("Adam::step called with " + std::to_string(params.size()) +
                        " parameters, state holds " + std::to_string(m_.size()));
  }
  for (const Parameter* p : params) {
    if (!p->grad.same_shape(p->value)) {
      throw ContractError("parameter '" + p->name + "' has no gradient");
    }
  }

  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    auto w = p.value.values();
    auto g = p.grad.values();
    auto m = m_[k].values();
    auto v = v_[k].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
    p.zero_grad();
  }
}

void Adam::restore(std::uint64_t steps, std::vector<Tensor> first, std::vector<Tensor> second) {
  if (first.size() != second.size()) throw ContractError("Adam::restore moment count mismatch");
  steps_ = steps;
  m_ = std::move(first);
  v_ = std::move(second);
}

}  // namespace grnfuse
