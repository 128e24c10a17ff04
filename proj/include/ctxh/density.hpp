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
#include <span>

#include "ctxh/tensor.hpp"

namespace ctxh {

/// Point annotation in pixel coordinates, 0-indexed: x is the column, y the row.
struct Dot {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Dot&, const Dot&) = default;
};

/// (1, 1, h, w) density map: one Gaussian of width `sigma` per dot, truncated
/// to a window of radius ceil(4 sigma) and to the image, then renormalized so
/// that each dot contributes exactly unit mass. Throws DataError for dots
/// outside [0, w) x [0, h) and ContractError for sigma <= 0.
template <typename T>
Tensor<T> density_from_dots(std::span<const Dot> dots, std::size_t h, std::size_t w, double sigma);

}  // namespace ctxh
