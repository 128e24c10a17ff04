// Copyright 2026 The ctxhourglass Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxh/tensor.hpp"

namespace ctxh {

template <typename T>
class Tape;

/// A trainable tensor that outlives any single tape. Gradients from every
/// backward pass that reaches it are summed into `grad` until zero_grad().
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  void zero_grad() { grad = zeros<T>(value.shape()); }
};

/// Handle to one node recorded on a Tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  /// Accumulated gradient; zeros if backward never reached this node.
  Tensor<T> grad() const;

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run reverse-mode tape.
///
/// Nodes are appended in evaluation order, so inputs always precede their
/// consumers. backward() walks the nodes once in reverse. Intermediate
/// gradients are recomputed on every call while leaf and parameter gradients
/// accumulate, so calling backward twice doubles them exactly.
template <typename T>
class Tape {
 public:
  /// Propagates the gradient of node `self` into its inputs via accumulate().
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = true);
  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }
  /// Enrolls a parameter; its gradient is accumulated into p.grad.
  Var<T> watch(Parameter<T>& p);

  /// Appends an op node. `fn` may be empty when no input requires a gradient.
  Var<T> record(std::string_view op, Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn fn);

  void backward(const Var<T>& loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  bool any_requires_grad(const std::vector<std::size_t>& ids) const;
  const std::string& op_name(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }

  /// Gradient arriving at node `id` during backward.
  const Tensor<T>& grad(std::size_t id) const;
  /// Mutable gradient storage for node `id`, materialized as zeros on first use.
  Tensor<T>& grad_slot(std::size_t id);
  void accumulate(std::size_t id, const Tensor<T>& g);
  bool has_grad(std::size_t id) const;

 private:
  struct Node {
    std::string op;
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  std::vector<Node> nodes_;
};

/// Outcome of a finite-difference comparison.
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  bool finite = true;

  bool passed(double tolerance) const { return finite && max_rel_error < tolerance; }
};

/// Scalar-valued function recorded on a tape, differentiated with respect to `x`.
using ScalarFn = std::function<Var<double>(Tape<double>&, Var<double> x)>;

/// Compares the reverse-mode gradient of f at x against central differences
/// (f(x + eps*e_i) - f(x - eps*e_i)) / (2 eps). The error per coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8). A non-finite value
/// anywhere marks the check as failed.
GradCheckResult finite_difference_check(const ScalarFn& f, const Tensor<double>& x, double eps);

}  // namespace ctxh
