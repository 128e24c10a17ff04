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

#include "ctxh/rng.hpp"
#include "ctxh/tensor.hpp"

namespace ctxh {

enum class InitKind { kXavier, kHeUniform };

/// Glorot/Xavier uniform: U(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> xavier_init(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// He uniform: U(-b, b) with b = sqrt(6 / fan_in).
template <typename T>
Tensor<T> he_uniform_init(const Shape& shape, std::size_t fan_in, Rng& rng);

}  // namespace ctxh
