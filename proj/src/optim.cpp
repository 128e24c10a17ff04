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

#include "ctxh/optim.hpp"

#include <cmath>

#include "ctxh/error.hpp"

namespace ctxh {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("optimizer.learning_rate", "must be > 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optimizer.beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optimizer.beta2", "must lie in [0, 1)");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer.momentum", "must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("optimizer.epsilon", "must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay", "must be >= 0");
}

template <typename T>
Optimizer<T>::Optimizer(OptimizerConfig config, const std::vector<Parameter<T>>& params) : config_(config) {
  config_.validate();
  for (const auto& p : params) {
    m_.push_back(zeros<T>(p.value.shape()));
    if (config_.kind == OptimizerConfig::Kind::kAdam) v_.push_back(zeros<T>(p.value.shape()));
  }
}

template <typename T>
void Optimizer<T>::step(std::vector<Parameter<T>>& params) {
  if (params.size() != m_.size()) throw ContractError("Optimizer::step: parameter list changed");
  for (const auto& p : params) {
    if (p.grad.empty()) continue;
    require_same_shape(p.grad.shape(), p.value.shape(), "Optimizer::step");
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(p.grad[i])) {
        throw NumericalError("non-finite gradient in parameter " + p.name + " at element " + std::to_string(i));
      }
    }
  }
  ++steps_;
  const T lr = static_cast<T>(config_.learning_rate);
  const T wd = static_cast<T>(config_.weight_decay);
  if (config_.kind == OptimizerConfig::Kind::kAdam) {
    const T b1 = static_cast<T>(config_.beta1);
    const T b2 = static_cast<T>(config_.beta2);
    const T eps = static_cast<T>(config_.epsilon);
    const double t = static_cast<double>(steps_);
    const T c1 = static_cast<T>(1.0 - std::pow(config_.beta1, t));
    const T c2 = static_cast<T>(1.0 - std::pow(config_.beta2, t));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter<T>& p = params[k];
      if (p.grad.empty()) continue;
      T* w = p.value.raw();
      T* m = m_[k].raw();
      T* v = v_[k].raw();
      const T* g = p.grad.raw();
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const T gi = g[i] + wd * w[i];
        m[i] = b1 * m[i] + (T(1) - b1) * gi;
        v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
        const T mhat = m[i] / c1;
        const T vhat = v[i] / c2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  } else {
    const T mu = static_cast<T>(config_.momentum);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter<T>& p = params[k];
      if (p.grad.empty()) continue;
      T* w = p.value.raw();
      T* vel = m_[k].raw();
      const T* g = p.grad.raw();
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        vel[i] = mu * vel[i] + g[i] + wd * w[i];
        w[i] -= lr * vel[i];
      }
    }
  }
}

template <typename T>
void Optimizer<T>::save_state(Archive& archive) const {
  archive.header["optimizer_steps"] = steps_;
  for (std::size_t k = 0; k < m_.size(); ++k) {
    archive.tensors.push_back({"opt.m/" + std::to_string(k), m_[k].template cast<float>()});
    if (!v_.empty()) archive.tensors.push_back({"opt.v/" + std::to_string(k), v_[k].template cast<float>()});
  }
}

template <typename T>
void Optimizer<T>::load_state(const Archive& archive, const std::vector<Parameter<T>>& params) {
  if (params.size() != m_.size()) throw ContractError("Optimizer::load_state: parameter list changed");
  steps_ = archive.header.at("optimizer_steps").get<std::size_t>();
  for (std::size_t k = 0; k < m_.size(); ++k) {
    m_[k] = archive.at("opt.m/" + std::to_string(k)).template cast<T>();
    if (!v_.empty()) v_[k] = archive.at("opt.v/" + std::to_string(k)).template cast<T>();
    require_same_shape(m_[k].shape(), params[k].value.shape(), "Optimizer::load_state");
  }
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace ctxh
