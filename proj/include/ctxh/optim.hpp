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
#include <vector>

#include "ctxh/archive.hpp"
#include "ctxh/autodiff.hpp"

namespace ctxh {

struct OptimizerConfig {
  enum class Kind { kAdam, kSgdMomentum };
  Kind kind = Kind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;  // Adam first-moment decay
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;  // SGD only
  double weight_decay = 0.0;

  /// Throws ConfigError naming the offending "optimizer.*" field.
  void validate() const;
  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// Adam or SGD with momentum over a fixed list of parameters.
///
/// Weight decay is L2: weight_decay * value is added to the gradient before
/// the update. A non-finite gradient aborts the step before any parameter is
/// touched, with a NumericalError naming the parameter.
template <typename T>
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, const std::vector<Parameter<T>>& params);

  const OptimizerConfig& config() const noexcept { return config_; }
  std::size_t steps() const noexcept { return steps_; }

  void step(std::vector<Parameter<T>>& params);

  /// Moment buffers as "<slot>/<parameter>" tensors plus the step count, for resuming.
  void save_state(Archive& archive) const;
  void load_state(const Archive& archive, const std::vector<Parameter<T>>& params);

 private:
  OptimizerConfig config_;
  std::size_t steps_ = 0;
  std::vector<Tensor<T>> m_;  // Adam first moment, or SGD velocity
  std::vector<Tensor<T>> v_;  // Adam second moment
};

}  // namespace ctxh
