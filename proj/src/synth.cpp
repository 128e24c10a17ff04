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

#include "ctxh/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ctxh/error.hpp"

namespace ctxh {

namespace {

std::string sample_id(const char* prefix, std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return std::string(prefix) + digits;
}

std::vector<Dot> place_blobs(std::size_t count, const SynthCountingOptions& o, Rng& rng) {
  const auto lo = static_cast<std::int64_t>(o.margin);
  const auto hi_x = static_cast<std::int64_t>(o.width) - 1 - lo;
  const auto hi_y = static_cast<std::int64_t>(o.height) - 1 - lo;
  if (hi_x < lo || hi_y < lo) throw ContractError("synth: margin leaves no room for blobs");
  const double min_d2 = o.min_separation * o.min_separation;
  for (int restart = 0; restart < 100; ++restart) {
    std::vector<Dot> dots;
    for (int attempt = 0; attempt < 20000 && dots.size() < count; ++attempt) {
      const Dot d{static_cast<double>(rng.between(lo, hi_x)), static_cast<double>(rng.between(lo, hi_y))};
      const bool clear = std::none_of(dots.begin(), dots.end(), [&](const Dot& e) {
        return (e.x - d.x) * (e.x - d.x) + (e.y - d.y) * (e.y - d.y) < min_d2;
      });
      if (clear) dots.push_back(d);
    }
    if (dots.size() == count) return dots;
  }
  throw ContractError("synth: cannot place " + std::to_string(count) + " blobs with the requested separation");
}

Sample render_counting(std::size_t index, const SynthCountingOptions& o, Rng rng) {
  const std::size_t count = static_cast<std::size_t>(
      rng.between(static_cast<std::int64_t>(o.min_blobs), static_cast<std::int64_t>(o.max_blobs)));
  Sample s;
  s.id = sample_id("count_", index);
  s.dots = place_blobs(count, o, rng);
  const std::size_t h = o.height, w = o.width;
  std::vector<double> clean(h * w, o.background);
  for (const Dot& d : s.dots) {
    const double sigma = rng.uniform(o.blob_sigma_min, o.blob_sigma_max);
    const double amp = rng.uniform(o.amplitude_min, o.amplitude_max);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    const auto r = static_cast<long>(std::ceil(4.0 * sigma));
    for (long y = std::max(0L, static_cast<long>(d.y) - r); y <= std::min<long>(h - 1, static_cast<long>(d.y) + r); ++y) {
      for (long x = std::max(0L, static_cast<long>(d.x) - r); x <= std::min<long>(w - 1, static_cast<long>(d.x) + r);
           ++x) {
        const double dx = x - d.x, dy = y - d.y;
        clean[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] += amp * std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
  }
  s.image = Tensor<float>({1, 1, h, w});
  for (std::size_t p = 0; p < h * w; ++p) {
    double v = clean[p];
    if (o.photons > 0.0) v += std::sqrt(std::max(v, 0.0) / o.photons) * rng.normal() + o.read_noise * rng.normal();
    s.image[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  s.density = density_from_dots<float>(s.dots, h, w, o.density_sigma);
  return s;
}

Sample render_segmentation(std::size_t index, const SynthSegmentationOptions& o, Rng rng) {
  const std::size_t h = o.height, w = o.width;
  const std::size_t cells = static_cast<std::size_t>(
      rng.between(static_cast<std::int64_t>(o.min_cells), static_cast<std::int64_t>(o.max_cells)));
  struct Cell {
    double x, y, shade;
  };
  std::vector<Cell> seeds;
  for (std::size_t k = 0; k < cells; ++k) {
    seeds.push_back({rng.uniform(0.0, static_cast<double>(w)), rng.uniform(0.0, static_cast<double>(h)),
                     rng.uniform(0.55, 0.85)});
  }
  // Low-frequency sinusoidal displacement bends the straight Voronoi edges.
  const double two_pi = 2.0 * std::numbers::pi;
  const double fx = rng.uniform(1.0, 3.0) / static_cast<double>(w), fy = rng.uniform(1.0, 3.0) / static_cast<double>(h);
  const double px = rng.uniform(0.0, two_pi), py = rng.uniform(0.0, two_pi);
  const double tex_f = rng.uniform(4.0, 8.0) / static_cast<double>(w), tex_p = rng.uniform(0.0, two_pi);

  Sample s;
  s.id = sample_id("seg_", index);
  s.image = Tensor<float>({1, 1, h, w});
  s.labels = LabelMap({1, 1, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double qx = static_cast<double>(x) + o.wave_amplitude * std::sin(two_pi * fy * static_cast<double>(y) + py);
      const double qy = static_cast<double>(y) + o.wave_amplitude * std::sin(two_pi * fx * static_cast<double>(x) + px);
      double d1 = std::numeric_limits<double>::infinity(), d2 = d1;
      std::size_t nearest = 0;
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        const double d = std::hypot(qx - seeds[k].x, qy - seeds[k].y);
        if (d < d1) {
          d2 = d1;
          d1 = d;
          nearest = k;
        } else if (d < d2) {
          d2 = d;
        }
      }
      const bool membrane = d2 - d1 < o.membrane_width;
      const double texture = 0.06 * std::sin(two_pi * tex_f * (static_cast<double>(x) + 0.7 * static_cast<double>(y)) + tex_p);
      double v = membrane ? 0.15 + 0.05 * std::sin(0.9 * static_cast<double>(x + y)) : seeds[nearest].shade + texture;
      v += o.noise * rng.normal();
      s.image(0, 0, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      (*s.labels)(0, 0, y, x) = membrane ? 1 : 0;
    }
  }
  return s;
}

}  // namespace

Dataset synth_counting_set(std::size_t n, const SynthCountingOptions& options, const Rng& rng) {
  if (options.min_blobs > options.max_blobs) throw ContractError("synth: min_blobs > max_blobs");
  Dataset ds;
  ds.task = Task::kCount;
  for (std::size_t i = 0; i < n; ++i) ds.samples.push_back(render_counting(i, options, rng.derive("image", i)));
  ds.split = default_synth_split(Task::kCount, n);
  return ds;
}

Dataset synth_segmentation_set(std::size_t n, const SynthSegmentationOptions& options, const Rng& rng) {
  if (options.min_cells < 2 || options.min_cells > options.max_cells) {
    throw ContractError("synth: need 2 <= min_cells <= max_cells");
  }
  Dataset ds;
  ds.task = Task::kSegment;
  for (std::size_t i = 0; i < n; ++i) ds.samples.push_back(render_segmentation(i, options, rng.derive("image", i)));
  ds.split = default_synth_split(Task::kSegment, n);
  return ds;
}

SplitSpec default_synth_split(Task task, std::size_t n) {
  SplitSpec s;
  if (task == Task::kCount) {
    // Up to 32 train and 16 val images; validation gets at least one image
    // whenever there are two, and everything beyond 48 is held out for test.
    s.val = n >= 2 ? std::clamp<std::size_t>(n > 32 ? n - 32 : 1, 1, 16) : 0;
    s.train = std::min<std::size_t>(32, n - s.val);
    s.test = n - s.train - s.val;
  } else {
    s.val = n >= 2 ? std::max<std::size_t>(1, n / 6) : 0;
    s.train = n - s.val;
  }
  return s;
}

}  // namespace ctxh
