// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over a linear tape.
//
// A Tape records every primitive in execution order, so inputs always precede
// the nodes that consume them and a single reverse sweep visits each node once.
// Trainable state lives in Parameter objects outside the tape; binding a
// Parameter creates a leaf, and after the sweep leaf gradients are added into
// Parameter::grad. Gradients accumulate until explicitly zeroed.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "grnfuse/tensor.hpp"

namespace grnfuse {

struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  void zero_grad() { grad.fill(0.0); }

  std::string name;
  Tensor value;
  Tensor grad;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  std::size_t index() const noexcept { return index_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

// Everything a backward rule may read or write. Entries of input_grads are
// null for inputs that do not require a gradient.
struct BackwardContext {
  const Tensor& out_value;
  const Tensor& out_grad;
  std::span<const Tensor* const> input_values;
  std::span<Tensor* const> input_grads;
};

class Tape {
 public:
  using BackwardFn = std::function<void(const BackwardContext&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Binding the same parameter twice returns the same leaf.
  Var parameter(Parameter& p);

  // Appends a primitive. `fn` runs during backward only if some input needs a
  // gradient. Throws NumericError if `value` holds NaN/Inf.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn);

  // Reverse sweep from a scalar loss, then adds leaf gradients into the bound
  // parameters. Throws ContractError for a non-scalar loss.
  void backward(Var loss);

  // The two halves of backward(), for callers that sweep several tapes in
  // parallel and reduce into the parameters in a fixed order.
  void backward_leaves(Var loss);
  void flush_gradients() const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const char* op_name(std::size_t i) const { return nodes_.at(i).op; }
  const std::vector<std::size_t>& inputs_of(std::size_t i) const { return nodes_.at(i).inputs; }
  bool requires_grad(Var v) const { return nodes_.at(v.index()).needs_grad; }

 private:
  friend class Var;

  struct Node {
    const char* op = "";
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* parameter = nullptr;
    bool needs_grad = false;
  };

  std::size_t check_owned(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
  bool swept_ = false;
};

// Differentiable primitives. All operands must live on the same tape.
Var matmul(Var a, Var b);
Var matmul_transpose_b(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // element-wise
Var scale(Var a, double factor);
Var add_row(Var x, Var row);  // broadcasts a 1 x d row over every row of x
Var relu(Var a);
Var softmax_rows(Var a);
Var transpose(Var a);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t start, std::size_t width);
Var gather_rows(Var table, std::span<const std::size_t> rows);
// out[v] = mean of a[u] over u in groups[v]; empty groups give a zero row.
Var mean_rows_by_group(Var a, const std::vector<std::vector<std::size_t>>& groups);
Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5);
Var sum(Var a);
Var mean(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

}  // namespace grnfuse
