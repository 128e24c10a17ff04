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

#include "ctxh/dataset.hpp"
#include "ctxh/rng.hpp"

namespace ctxh {

struct ElasticSpec {
  bool enabled = true;
  double grid_spacing = 16.0;  // pixels between displacement control points
  double sigma = 2.0;          // std-dev of control-point displacements, pixels
  friend bool operator==(const ElasticSpec&, const ElasticSpec&) = default;
};

struct AugmentationSpec {
  bool flips = true;      // horizontal and vertical, each with probability 1/2
  bool rotations = true;  // multiples of 90 degrees; only 0/180 for non-square images
  ElasticSpec elastic;

  bool any() const noexcept { return flips || rotations || elastic.enabled; }
  /// Throws ConfigError naming the offending "augmentation.*" field.
  void validate() const;
  friend bool operator==(const AugmentationSpec&, const AugmentationSpec&) = default;
};

/// Applies one randomly drawn transform to image and target alike. Labels are
/// resampled nearest-neighbor; densities bilinearly, then rescaled so their
/// total mass is unchanged. Dots follow flips and rotations exactly and the
/// elastic warp approximately.
Sample augment(const Sample& sample, const AugmentationSpec& spec, Rng& rng);

/// Deterministic building blocks, exposed for testing.
Sample flip_horizontal(const Sample& sample);
Sample flip_vertical(const Sample& sample);
/// Counter-clockwise by quarter_turns * 90 degrees.
Sample rotate90(const Sample& sample, int quarter_turns);

/// Dense displacement field (dx, dy per pixel) interpolated bilinearly from a
/// coarse grid of N(0, sigma) control-point offsets.
struct DisplacementField {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> dx;
  std::vector<double> dy;
};
DisplacementField random_displacement(std::size_t h, std::size_t w, const ElasticSpec& spec, Rng& rng);
/// Output pixel (y, x) samples the source at (y + dy, x + dx).
Sample warp(const Sample& sample, const DisplacementField& field);

}  // namespace ctxh
