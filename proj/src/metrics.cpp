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

#include "ctxh/metrics.hpp"

#include <cmath>

#include "ctxh/error.hpp"
#include "ctxh/parallel.hpp"

namespace ctxh {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw ContractError("ConfusionMatrix: need at least one class");
}

void ConfusionMatrix::add(const LabelMap& predicted, const LabelMap& truth) {
  require_same_shape(predicted.shape(), truth.shape(), "ConfusionMatrix::add");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::int32_t t = truth[i], p = predicted[i];
    if (t < 0 || static_cast<std::size_t>(t) >= k_ || p < 0 || static_cast<std::size_t>(p) >= k_) {
      throw DataError("ConfusionMatrix: label out of range [0, " + std::to_string(k_) + ")");
    }
    ++counts_[static_cast<std::size_t>(t) * k_ + static_cast<std::size_t>(p)];
  }
}

SegmentationMetrics ConfusionMatrix::metrics() const {
  std::uint64_t total = 0, correct = 0;
  for (std::size_t t = 0; t < k_; ++t) {
    for (std::size_t p = 0; p < k_; ++p) total += counts_[t * k_ + p];
    correct += counts_[t * k_ + t];
  }
  SegmentationMetrics m;
  if (total == 0) return m;
  m.pixel_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  double iou_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < k_; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < k_; ++j) {
      row += counts_[c * k_ + j];
      col += counts_[j * k_ + c];
    }
    const std::uint64_t inter = counts_[c * k_ + c];
    const std::uint64_t uni = row + col - inter;
    if (uni == 0) continue;
    iou_sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++present;
  }
  m.mean_iou = present > 0 ? iou_sum / static_cast<double>(present) : 0.0;
  return m;
}

LabelMap argmax_channels(const Tensor<float>& logits) {
  const Shape& s = logits.shape();
  LabelMap out({s.n, 1, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t p = 0; p < s.spatial(); ++p) {
      std::size_t best = 0;
      float best_v = logits.plane(n, 0)[p];
      for (std::size_t c = 1; c < s.c; ++c) {
        const float v = logits.plane(n, c)[p];
        if (v > best_v) {
          best_v = v;
          best = c;
        }
      }
      out.plane(n, 0)[p] = static_cast<std::int32_t>(best);
    }
  }
  return out;
}

SegmentationMetrics evaluate_segmentation(Network<float>& net, std::span<const Sample> samples) {
  std::vector<LabelMap> predicted(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    if (!samples[i].labels) throw DataError("evaluate_segmentation: sample " + samples[i].id + " has no labels");
    predicted[i] = argmax_channels(net.predict(samples[i].image));
  });
  ConfusionMatrix cm(net.config().out_channels);
  for (std::size_t i = 0; i < samples.size(); ++i) cm.add(predicted[i], *samples[i].labels);
  return cm.metrics();
}

double mean_absolute_error(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("mean_absolute_error: length mismatch");
  if (predicted.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) acc += std::abs(predicted[i] - truth[i]);
  return acc / static_cast<double>(predicted.size());
}

double evaluate_counting(Network<float>& net, std::span<const Sample> samples, double target_scale) {
  std::vector<double> predicted(samples.size()), truth(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const Tensor<float> density = net.predict(samples[i].image);
    double mass = 0.0;
    for (float v : density.data()) mass += v;
    predicted[i] = mass / target_scale;
    truth[i] = samples[i].count();
  });
  return mean_absolute_error(predicted, truth);
}

}  // namespace ctxh
