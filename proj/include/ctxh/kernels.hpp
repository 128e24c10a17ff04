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
#include <cstdint>
#include <vector>

#include "ctxh/tensor.hpp"

// Tape-free forward and backward kernels. Backward kernels accumulate into the
// gradient tensors they are given and skip any that are null.
namespace ctxh::kernels {

/// Stride-1 convolution with zero padding (k-1)/2 on every side.
/// x: (n, c, h, w); weight: (o, c, k, k) with k odd; bias: (1, o, 1, 1).
template <typename T>
Tensor<T> conv2d_same_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
void conv2d_same_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out,
                          Tensor<T>* grad_x, Tensor<T>* grad_weight, Tensor<T>* grad_bias);

/// Transposed convolution (adjoint of an unpadded strided convolution).
/// weight: (o, c, k, k); output spatial size (h-1)*stride + k.
template <typename T>
Tensor<T> transposed_conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                                    std::size_t stride);

template <typename T>
void transposed_conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out,
                                std::size_t stride, Tensor<T>* grad_x, Tensor<T>* grad_weight,
                                Tensor<T>* grad_bias);

/// 2x2 max pooling. `argmax` receives, per output element, the flat offset of
/// the winning input element (first maximum in row-major scan order).
template <typename T>
Tensor<T> maxpool2_forward(const Tensor<T>& x, std::vector<std::size_t>* argmax);

template <typename T>
void maxpool2_backward(const Tensor<T>& grad_out, const std::vector<std::size_t>& argmax, Tensor<T>& grad_x);

/// Position on the small (h1, w1) grid tied to position (i, j) of the large (h2, w2) grid.
struct GridIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

/// (floor(i*h1/h2), floor(j*w1/w2)) in exact integer arithmetic.
/// Requires i < h2, j < w2, 1 <= h1 <= h2, 1 <= w1 <= w2; throws ContractError otherwise.
GridIndex context_index_map(std::size_t i, std::size_t j, std::size_t h1, std::size_t w1, std::size_t h2,
                            std::size_t w2);

/// Lookup table of context_index_map along one axis: entry i is floor(i*small/large).
std::vector<std::size_t> context_axis_map(std::size_t small, std::size_t large);

/// out[n, c, i, j] = small[n, c, row(i), col(j)] on an (h2, w2) grid.
template <typename T>
Tensor<T> context_gather(const Tensor<T>& small, std::size_t h2, std::size_t w2);

/// Adjoint of context_gather: every large-grid gradient is added to the small-grid
/// cell it was gathered from.
template <typename T>
void context_scatter_add(const Tensor<T>& grad_large, Tensor<T>& grad_small);

/// Channel concatenation, a's channels first.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

template <typename T>
Tensor<T> selu_forward(const Tensor<T>& x);

template <typename T>
void selu_backward(const Tensor<T>& x, const Tensor<T>& grad_out, Tensor<T>& grad_x);

}  // namespace ctxh::kernels
