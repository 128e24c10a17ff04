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

#include "ctxh/dataset.hpp"
#include "ctxh/rng.hpp"

namespace ctxh {

struct SynthCountingOptions {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t min_blobs = 5;
  std::size_t max_blobs = 25;
  double min_separation = 7.0;  // pixels between blob centers
  std::size_t margin = 2;       // minimum distance of a center from the border
  double blob_sigma_min = 1.5;
  double blob_sigma_max = 2.0;
  double amplitude_min = 0.5;
  double amplitude_max = 1.0;
  double background = 0.05;
  double photons = 400.0;  // shot-noise scale; 0 disables noise
  double read_noise = 0.01;
  double density_sigma = 3.0;
};

struct SynthSegmentationOptions {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t min_cells = 6;
  std::size_t max_cells = 12;
  double membrane_width = 2.0;  // in distance-difference units (~pixels)
  double wave_amplitude = 2.0;
  double noise = 0.04;
};

/// Gaussian blobs on a dim background with shot and read noise; every blob
/// center is an annotated dot. Image i depends only on (rng seed, i).
Dataset synth_counting_set(std::size_t n, const SynthCountingOptions& options, const Rng& rng);

/// Randomly perturbed Voronoi cells; label 1 marks membrane pixels, 0 cell interiors.
Dataset synth_segmentation_set(std::size_t n, const SynthSegmentationOptions& options, const Rng& rng);

/// Default split for a freshly synthesized set of n images.
SplitSpec default_synth_split(Task task, std::size_t n);

}  // namespace ctxh
