// Copyright 2026 The grnfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "grnfuse/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "grnfuse/errors.hpp"

namespace grnfuse {

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.rows(), value.cols()) {}

const Tensor& Var::value() const { return tape_->nodes_[tape_->check_owned(*this)].value; }
const Tensor& Var::grad() const { return tape_->nodes_[tape_->check_owned(*this)].grad; }

std::size_t Tape::check_owned(Var v) const {
  if (v.tape_ != this || v.index_ >= nodes_.size()) {
    throw ContractError("variable does not belong to this tape");
  }
  return v.index_;
}

Var Tape::constant(Tensor value) { return record("constant", std::move(value), {}, nullptr); }

Var Tape::parameter(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Var v = record("parameter", p.value, {}, nullptr);
  Node& node = nodes_[v.index_];
  node.parameter = &p;
  node.needs_grad = true;
  bound_.emplace(&p, v.index_);
  return v;
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Tape::record(const char* op, Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  if (swept_) throw ContractError("cannot record on a tape after backward");
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    const std::size_t idx = check_owned(in);
    node.inputs.push_back(idx);
    node.needs_grad = node.needs_grad || nodes_[idx].needs_grad;
  }
  if (node.needs_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  backward_leaves(loss);
  flush_gradients();
}

void Tape::backward_leaves(Var loss) {
  const std::size_t root = check_owned(loss);
  if (nodes_[root].value.size() != 1) {
    throw ContractError("backward requires a scalar loss, got " +
                        shape_string(nodes_[root].value));
  }
  if (swept_) throw ContractError("backward already ran on this tape");
  swept_ = true;
  if (!nodes_[root].needs_grad) return;

  nodes_[root].grad = Tensor(1, 1, 1.0);
  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.needs_grad || node.grad.empty() || !node.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t idx : node.inputs) {
      Node& in = nodes_[idx];
      in_values.push_back(&in.value);
      if (in.needs_grad) {
        if (in.grad.empty()) in.grad = Tensor(in.value.rows(), in.value.cols());
        in_grads.push_back(&in.grad);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    node.backward(BackwardContext{node.value, node.grad, in_values, in_grads});
  }
}

void Tape::flush_gradients() const {
  for (const Node& node : nodes_) {
    if (node.parameter == nullptr || node.grad.empty()) continue;
    Parameter& p = *node.parameter;
    if (!p.grad.same_shape(p.value)) p.grad = Tensor(p.value.rows(), p.value.cols());
    p.grad += node.grad;
  }
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": " + shape_string(a) + " vs " + shape_string(b));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tensor out = matmul(a.value(), b.value());
  return a.tape().record("matmul", std::move(out), {a, b}, [](const BackwardContext& c) {
    const Tensor& av = *c.input_values[0];
    const Tensor& bv = *c.input_values[1];
    if (c.input_grads[0]) *c.input_grads[0] += matmul_transpose_b(c.out_grad, bv);
    if (c.input_grads[1]) *c.input_grads[1] += matmul_transpose_a(av, c.out_grad);
  });
}

Var matmul_transpose_b(Var a, Var b) {
  Tensor out = matmul_transpose_b(a.value(), b.value());
  return a.tape().record("matmul_t", std::move(out), {a, b}, [](const BackwardContext& c) {
    const Tensor& av = *c.input_values[0];
    const Tensor& bv = *c.input_values[1];
    if (c.input_grads[0]) *c.input_grads[0] += matmul(c.out_grad, bv);
    if (c.input_grads[1]) *c.input_grads[1] += matmul_transpose_a(c.out_grad, av);
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  out += b.value();
  return a.tape().record("add", std::move(out), {a, b}, [](const BackwardContext& c) {
    if (c.input_grads[0]) *c.input_grads[0] += c.out_grad;
    if (c.input_grads[1]) *c.input_grads[1] += c.out_grad;
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return a.tape().record("sub", std::move(out), {a, b}, [](const BackwardContext& c) {
    if (c.input_grads[0]) *c.input_grads[0] += c.out_grad;
    if (Tensor* g = c.input_grads[1]) {
      auto gv = g->values();
      auto og = c.out_grad.values();
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] -= og[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return a.tape().record("mul", std::move(out), {a, b}, [](const BackwardContext& c) {
    auto og = c.out_grad.values();
    for (int k = 0; k < 2; ++k) {
      Tensor* g = c.input_grads[k];
      if (!g) continue;
      auto other = c.input_values[1 - k]->values();
      auto gv = g->values();
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += og[i] * other[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return a.tape().record("scale", std::move(out), {a}, [factor](const BackwardContext& c) {
    auto gv = c.input_grads[0]->values();
    auto og = c.out_grad.values();
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += factor * og[i];
  });
}

Var add_row(Var x, Var row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != xv.cols()) {
    throw ShapeError("add_row: " + shape_string(xv) + " + " + shape_string(rv));
  }
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += rv[j];
  }
  return x.tape().record("add_row", std::move(out), {x, row}, [](const BackwardContext& c) {
    if (c.input_grads[0]) *c.input_grads[0] += c.out_grad;
    if (Tensor* g = c.input_grads[1]) {
      for (std::size_t i = 0; i < c.out_grad.rows(); ++i) {
        auto og = c.out_grad.row(i);
        for (std::size_t j = 0; j < og.size(); ++j) (*g)[j] += og[j];
      }
    }
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return a.tape().record("relu", std::move(out), {a}, [](const BackwardContext& c) {
    auto gv = c.input_grads[0]->values();
    auto og = c.out_grad.values();
    auto in = c.input_values[0]->values();
    for (std::size_t i = 0; i < gv.size(); ++i) {
      if (in[i] > 0.0) gv[i] += og[i];
    }
  });
}

Var softmax_rows(Var a) {
  Tensor out = softmax_rows(a.value());
  return a.tape().record("softmax_rows", std::move(out), {a}, [](const BackwardContext& c) {
    Tensor& g = *c.input_grads[0];
    for (std::size_t i = 0; i < c.out_value.rows(); ++i) {
      auto y = c.out_value.row(i);
      auto dy = c.out_grad.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < y.size(); ++j) dot += y[j] * dy[j];
      auto gr = g.row(i);
      for (std::size_t j = 0; j < y.size(); ++j) gr[j] += y[j] * (dy[j] - dot);
    }
  });
}

Var transpose(Var a) {
  return a.tape().record("transpose", transpose(a.value()), {a}, [](const BackwardContext& c) {
    *c.input_grads[0] += transpose(c.out_grad);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols of zero tensors");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + shape_string(parts.front().value()) + " vs " +
                       shape_string(p.value()));
    }
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < rows; ++i) std::copy_n(&v.values()[i * v.cols()], v.cols(), &out(i, off));
    off += v.cols();
  }
  return parts.front().tape().record(
      "concat_cols", std::move(out), parts, [offsets](const BackwardContext& c) {
        for (std::size_t k = 0; k < offsets.size(); ++k) {
          Tensor* g = c.input_grads[k];
          if (!g) continue;
          for (std::size_t i = 0; i < g->rows(); ++i) {
            auto gr = g->row(i);
            const double* src = &c.out_grad.values()[i * c.out_grad.cols() + offsets[k]];
            for (std::size_t j = 0; j < gr.size(); ++j) gr[j] += src[j];
          }
        }
      });
}

Var slice_cols(Var a, std::size_t start, std::size_t width) {
  const Tensor& av = a.value();
  if (start + width > av.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(start) + ", " + std::to_string(start + width) +
                     ") of " + shape_string(av));
  }
  Tensor out(av.rows(), width);
  for (std::size_t i = 0; i < av.rows(); ++i) std::copy_n(&av.values()[i * av.cols() + start], width, &out(i, 0));
  return a.tape().record("slice_cols", std::move(out), {a}, [start](const BackwardContext& c) {
    Tensor& g = *c.input_grads[0];
    for (std::size_t i = 0; i < c.out_grad.rows(); ++i) {
      auto og = c.out_grad.row(i);
      for (std::size_t j = 0; j < og.size(); ++j) g(i, start + j) += og[j];
    }
  });
}

Var gather_rows(Var table, std::span<const std::size_t> rows) {
  const Tensor& tv = table.value();
  Tensor out(rows.size(), tv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= tv.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " of " + shape_string(tv));
    }
    std::copy_n(&tv.values()[rows[i] * tv.cols()], tv.cols(), &out(i, 0));
  }
  std::vector<std::size_t> index(rows.begin(), rows.end());
  return table.tape().record("gather_rows", std::move(out), {table},
                             [index = std::move(index)](const BackwardContext& c) {
                               Tensor& g = *c.input_grads[0];
                               for (std::size_t i = 0; i < index.size(); ++i) {
                                 auto og = c.out_grad.row(i);
                                 auto gr = g.row(index[i]);
                                 for (std::size_t j = 0; j < og.size(); ++j) gr[j] += og[j];
                               }
                             });
}

Var mean_rows_by_group(Var a, const std::vector<std::vector<std::size_t>>& groups) {
  const Tensor& av = a.value();
  Tensor out(groups.size(), av.cols());
  for (std::size_t v = 0; v < groups.size(); ++v) {
    const auto& members = groups[v];
    if (members.empty()) continue;
    auto o = out.row(v);
    for (std::size_t u : members) {
      if (u >= av.rows()) throw ShapeError("mean_rows_by_group: member out of range");
      auto r = av.row(u);
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += r[j];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (double& x : o) x *= inv;
  }
  auto shared = std::make_shared<const std::vector<std::vector<std::size_t>>>(groups);
  return a.tape().record("mean_rows_by_group", std::move(out), {a},
                         [shared](const BackwardContext& c) {
                           Tensor& g = *c.input_grads[0];
                           for (std::size_t v = 0; v < shared->size(); ++v) {
                             const auto& members = (*shared)[v];
                             if (members.empty()) continue;
                             const double inv = 1.0 / static_cast<double>(members.size());
                             auto og = c.out_grad.row(v);
                             for (std::size_t u : members) {
                               auto gr = g.row(u);
                               for (std::size_t j = 0; j < og.size(); ++j) gr[j] += inv * og[j];
                             }
                           }
                         });
}

Var layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  if (gain.rows() != 1 || gain.cols() != d || !gain.value().same_shape(bias.value())) {
    throw ShapeError("layer_norm_rows: " + shape_string(xv) + " with gain " +
                     shape_string(gain.value()) + " and bias " + shape_string(bias.value()));
  }
  Tensor out(xv.rows(), d);
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    auto r = xv.row(i);
    double mu = 0.0;
    for (double v : r) mu += v;
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (double v : r) var += (v - mu) * (v - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    auto o = out.row(i);
    for (std::size_t j = 0; j < d; ++j) o[j] = gv[j] * (r[j] - mu) * inv + bv[j];
  }
  return x.tape().record(
      "layer_norm_rows", std::move(out), {x, gain, bias}, [eps](const BackwardContext& c) {
        const Tensor& xin = *c.input_values[0];
        const Tensor& g = *c.input_values[1];
        const std::size_t d = xin.cols();
        std::vector<double> xhat(d), dxhat(d);
        for (std::size_t i = 0; i < xin.rows(); ++i) {
          auto r = xin.row(i);
          double mu = 0.0;
          for (double v : r) mu += v;
          mu /= static_cast<double>(d);
          double var = 0.0;
          for (double v : r) var += (v - mu) * (v - mu);
          var /= static_cast<double>(d);
          const double inv = 1.0 / std::sqrt(var + eps);
          auto dy = c.out_grad.row(i);
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            xhat[j] = (r[j] - mu) * inv;
            dxhat[j] = dy[j] * g[j];
            sum_dxhat += dxhat[j];
            sum_dxhat_xhat += dxhat[j] * xhat[j];
          }
          if (Tensor* gx = c.input_grads[0]) {
            auto gr = gx->row(i);
            const double dd = static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j) {
              gr[j] += inv / dd * (dd * dxhat[j] - sum_dxhat - xhat[j] * sum_dxhat_xhat);
            }
          }
          if (Tensor* gg = c.input_grads[1]) {
            for (std::size_t j = 0; j < d; ++j) (*gg)[j] += dy[j] * xhat[j];
          }
          if (Tensor* gb = c.input_grads[2]) {
            for (std::size_t j = 0; j < d; ++j) (*gb)[j] += dy[j];
          }
        }
      });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return a.tape().record("sum", Tensor::scalar(total), {a}, [](const BackwardContext& c) {
    const double g = c.out_grad[0];
    for (double& v : c.input_grads[0]->values()) v += g;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

}  // namespace grnfuse
