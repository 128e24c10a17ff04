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
#include <span>

#include "ctxh/autodiff.hpp"
#include "ctxh/kernels.hpp"
#include "ctxh/tensor.hpp"

namespace ctxh {

/// Per-pixel class indices, shape (n, 1, h, w).
using LabelMap = Tensor<std::int32_t>;

/// Weight bank plus per-output-channel bias of one convolutional unit.
/// weights: (out_channels, in_channels, k, k); bias: (1, out_channels, 1, 1).
template <typename T>
struct ConvFilter {
  Tensor<T> weights;
  Tensor<T> bias;

  std::size_t out_channels() const noexcept { return weights.shape().n; }
  std::size_t in_channels() const noexcept { return weights.shape().c; }
  std::size_t kernel() const noexcept { return weights.shape().h; }

  /// Zero weights and bias.
  static ConvFilter zeros(std::size_t out_channels, std::size_t in_channels, std::size_t k);
};

/// Two filter banks tied across scales; see contextual_conv.
template <typename T>
struct ContextLink {
  ConvFilter<T> bank_small;
  ConvFilter<T> bank_large;
};

using kernels::context_index_map;
using kernels::GridIndex;

// ---------------------------------------------------------------------------
// Tensor-level operators (no gradient recording).

template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& x, const ConvFilter<T>& f);
template <typename T>
Tensor<T> transposed_conv2d(const Tensor<T>& x, const ConvFilter<T>& f, std::size_t stride = 2);
template <typename T>
Tensor<T> maxpool2(const Tensor<T>& x);
template <typename T>
Tensor<T> selu(const Tensor<T>& x);
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// SeLU(conv(large, bank_large)[i, j] + conv(small, bank_small)[row(i), col(j)]),
/// where (row, col) = context_index_map(i, j, ...). Output has large's spatial size.
template <typename T>
Tensor<T> contextual_conv(const Tensor<T>& small, const Tensor<T>& large, const ContextLink<T>& link);

/// Mean over pixels of -log softmax(logits)[label], softmax over channels.
template <typename T>
T softmax_cross_entropy(const Tensor<T>& logits, const LabelMap& labels);
/// Mean squared difference.
template <typename T>
T mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

// ---------------------------------------------------------------------------
// Recorded operators.

template <typename T>
Var<T> add(Var<T> a, Var<T> b);
template <typename T>
Var<T> mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> scale(Var<T> a, T factor);
/// Sum of all elements as a (1,1,1,1) scalar.
template <typename T>
Var<T> sum(Var<T> a);

template <typename T>
Var<T> conv2d_same(Var<T> x, Var<T> weight, Var<T> bias);
template <typename T>
Var<T> transposed_conv2d(Var<T> x, Var<T> weight, Var<T> bias, std::size_t stride = 2);
template <typename T>
Var<T> maxpool2(Var<T> x);
template <typename T>
Var<T> selu(Var<T> x);
template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b);

/// Resamples `small` onto an (h2, w2) grid through the context index map.
/// The gradient is the scatter-add of the large-grid gradient.
template <typename T>
Var<T> context_gather(Var<T> small, std::size_t h2, std::size_t w2);

/// One context source for a contextual convolution: the small map and its bank.
template <typename T>
struct ContextSource {
  Var<T> features;
  Var<T> weight;
  Var<T> bias;
};

/// SeLU(conv(large) + sum over sources of gather(conv(source))). With a single
/// source this is exactly the two-bank contextual convolution.
template <typename T>
Var<T> contextual_conv(Var<T> large, Var<T> weight_large, Var<T> bias_large,
                       std::span<const ContextSource<T>> sources);

template <typename T>
Var<T> contextual_conv(Var<T> small, Var<T> large, Var<T> weight_small, Var<T> bias_small, Var<T> weight_large,
                       Var<T> bias_large);

template <typename T>
Var<T> softmax_cross_entropy(Var<T> logits, const LabelMap& labels);
template <typename T>
Var<T> mse_loss(Var<T> pred, const Tensor<T>& target);

/// Identity in the forward pass; multiplies the incoming gradient by `factor`.
/// Exists to inject a known-wrong backward rule when testing gradient checks.
template <typename T>
Var<T> scaled_gradient(Var<T> x, T factor);

}  // namespace ctxh
