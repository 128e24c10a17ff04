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

#include "ctxh/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ctxh {

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
Tensor<T> Var<T>::grad() const {
  if (tape_->has_grad(id_)) return tape_->grad(id_);
  return zeros<T>(value().shape());
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  Node node;
  node.op = "leaf";
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.is_leaf = true;
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::watch(Parameter<T>& p) {
  Node node;
  node.op = "param:" + p.name;
  node.value = p.value;
  node.param = &p;
  node.requires_grad = true;
  node.is_leaf = true;
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
bool Tape<T>::any_requires_grad(const std::vector<std::size_t>& ids) const {
  return std::any_of(ids.begin(), ids.end(), [&](std::size_t id) { return nodes_.at(id).requires_grad; });
}

template <typename T>
Var<T> Tape<T>::record(std::string_view op, Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn fn) {
  for (std::size_t id : inputs) {
    if (id >= nodes_.size()) throw ContractError("Tape::record: input node does not exist");
  }
  Node node;
  node.op = std::string(op);
  node.value = std::move(value);
  node.requires_grad = fn && any_requires_grad(inputs);
  node.inputs = std::move(inputs);
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
bool Tape<T>::has_grad(std::size_t id) const {
  const Node& node = nodes_.at(id);
  if (node.param != nullptr) return !node.param->grad.empty();
  return !node.grad.empty();
}

template <typename T>
const Tensor<T>& Tape<T>::grad(std::size_t id) const {
  const Node& node = nodes_.at(id);
  return node.param != nullptr ? node.param->grad : node.grad;
}

template <typename T>
Tensor<T>& Tape<T>::grad_slot(std::size_t id) {
  Node& node = nodes_.at(id);
  Tensor<T>& slot = node.param != nullptr ? node.param->grad : node.grad;
  if (slot.empty()) slot = zeros<T>(node.value.shape());
  return slot;
}

template <typename T>
void Tape<T>::accumulate(std::size_t id, const Tensor<T>& g) {
  if (!nodes_.at(id).requires_grad) return;
  grad_slot(id) += g;
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  if (loss.valid() && &loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  const std::size_t root = loss.id();
  if (root >= nodes_.size()) throw ContractError("backward: unknown loss node");
  if (nodes_[root].value.shape() != Shape{1, 1, 1, 1}) {
    throw ContractError("backward: loss must be scalar (1,1,1,1), got " + to_string(nodes_[root].value.shape()));
  }
  for (Node& node : nodes_) {
    if (!node.is_leaf) node.grad = Tensor<T>();
  }
  if (!nodes_[root].requires_grad) return;
  grad_slot(root)[0] += T(1);
  for (std::size_t id = root + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.is_leaf || !node.backward || node.grad.empty()) continue;
    node.backward(*this, id);
  }
}

template class Var<float>;
template class Var<double>;
template class Tape<float>;
template class Tape<double>;

GradCheckResult finite_difference_check(const ScalarFn& f, const Tensor<double>& x, double eps) {
  if (!(eps > 0.0)) throw ContractError("finite_difference_check: epsilon must be positive");
  GradCheckResult result;

  Tensor<double> analytic;
  {
    Tape<double> tape;
    Var<double> v = tape.leaf(x);
    Var<double> loss = f(tape, v);
    tape.backward(loss);
    analytic = v.grad();
  }

  auto eval = [&](const Tensor<double>& at) {
    Tape<double> tape;
    Var<double> v = tape.leaf(at, false);
    Var<double> out = f(tape, v);
    if (out.value().size() != 1) throw ContractError("finite_difference_check: f must return a scalar");
    return out.value()[0];
  };

  Tensor<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double plus = eval(probe);
    probe[i] = orig - eps;
    const double minus = eval(probe);
    probe[i] = orig;

    const double numeric = (plus - minus) / (2.0 * eps);
    const double a = analytic[i];
    if (!std::isfinite(numeric) || !std::isfinite(a)) {
      result.finite = false;
      result.max_rel_error = std::numeric_limits<double>::infinity();
      result.worst_index = i;
      result.analytic_at_worst = a;
      result.numeric_at_worst = numeric;
      return result;
    }
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double err = std::abs(a - numeric) / denom;
    if (i == 0 || err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_index = i;
      result.analytic_at_worst = a;
      result.numeric_at_worst = numeric;
    }
  }
  return result;
}

}  // namespace ctxh
