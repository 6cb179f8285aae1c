// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "grnfuse/autodiff.hpp"

namespace grnfuse {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moment buffers are matched to parameters by
// position in the span passed to step(), so callers must pass the same
// parameter list every time.
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  // Updates every parameter from its gradient, then zeroes the gradients.
  void step(std::span<Parameter* const> params);

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t step_count() const noexcept { return steps_; }
  const std::vector<Tensor>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor>& second_moments() const noexcept { return v_; }

  // Restores a saved state (checkpoint resume).
  void restore(std::uint64_t steps, std::vector<Tensor> first, std::vector<Tensor> second);

 private:
  AdamConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace grnfuse
