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

#include <span>
#include <vector>

#include "ctxh/dataset.hpp"
#include "ctxh/hourglass.hpp"

namespace ctxh {

struct SegmentationMetrics {
  double pixel_accuracy = 0.0;
  /// Per-class IoU averaged over classes present in prediction or truth.
  double mean_iou = 0.0;
};

/// Accumulates a confusion matrix over any number of (prediction, truth) maps.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);
  void add(const LabelMap& predicted, const LabelMap& truth);
  SegmentationMetrics metrics() const;
  std::size_t classes() const noexcept { return k_; }

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;  // truth-major
};

/// Channel argmax of (n, c, h, w) logits; the lowest index wins ties.
LabelMap argmax_channels(const Tensor<float>& logits);

SegmentationMetrics evaluate_segmentation(Network<float>& net, std::span<const Sample> samples);

/// Mean absolute error between predicted counts (density sum / target_scale)
/// and the number of annotated dots.
double evaluate_counting(Network<float>& net, std::span<const Sample> samples, double target_scale);

double mean_absolute_error(std::span<const double> predicted, std::span<const double> truth);

}  // namespace ctxh
