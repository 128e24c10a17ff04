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

#include "ctxh/init.hpp"

#include <cmath>

namespace ctxh {

namespace {

template <typename T>
Tensor<T> uniform_fill(const Shape& shape, double bound, Rng& rng) {
  Tensor<T> out(shape);
  for (auto& v : out.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return out;
}

}  // namespace

template <typename T>
Tensor<T> xavier_init(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw ContractError("xavier_init: fan_in and fan_out must be >= 1");
  return uniform_fill<T>(shape, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

template <typename T>
Tensor<T> he_uniform_init(const Shape& shape, std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw ContractError("he_uniform_init: fan_in must be >= 1");
  return uniform_fill<T>(shape, std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
}

template Tensor<float> xavier_init<float>(const Shape&, std::size_t, std::size_t, Rng&);
template Tensor<double> xavier_init<double>(const Shape&, std::size_t, std::size_t, Rng&);
template Tensor<float> he_uniform_init<float>(const Shape&, std::size_t, Rng&);
template Tensor<double> he_uniform_init<double>(const Shape&, std::size_t, Rng&);

}  // namespace ctxh
