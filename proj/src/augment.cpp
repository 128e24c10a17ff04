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

#include "ctxh/augment.hpp"

#include <algorithm>
#include <cmath>

#include "ctxh/error.hpp"

namespace ctxh {

void AugmentationSpec::validate() const {
  if (elastic.enabled) {
    if (!(elastic.grid_spacing >= 1.0)) throw ConfigError("augmentation.elastic.grid_spacing", "must be >= 1");
    if (!(elastic.sigma >= 0.0)) throw ConfigError("augmentation.elastic.sigma", "must be >= 0");
  }
}

namespace {

// Applies a pixel permutation dst(y, x) = src(map(y, x)) to every plane of a tensor.
template <typename T, typename Map>
Tensor<T> remap(const Tensor<T>& src, std::size_t out_h, std::size_t out_w, Map map) {
  const Shape& s = src.shape();
  Tensor<T> out({s.n, s.c, out_h, out_w});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < out_h; ++y) {
        for (std::size_t x = 0; x < out_w; ++x) {
          const auto [sy, sx] = map(y, x);
          out(n, c, y, x) = src(n, c, sy, sx);
        }
      }
    }
  }
  return out;
}

template <typename Map, typename DotMap>
Sample remap_sample(const Sample& in, std::size_t out_h, std::size_t out_w, Map map, DotMap dot_map) {
  Sample out;
  out.id = in.id;
  out.image = remap(in.image, out_h, out_w, map);
  if (in.labels) out.labels = remap(*in.labels, out_h, out_w, map);
  if (!in.density.empty()) out.density = remap(in.density, out_h, out_w, map);
  for (const Dot& d : in.dots) out.dots.push_back(dot_map(d));
  return out;
}

}  // namespace

Sample flip_horizontal(const Sample& s) {
  const std::size_t h = s.image.shape().h, w = s.image.shape().w;
  return remap_sample(
      s, h, w, [&](std::size_t y, std::size_t x) { return std::pair{y, w - 1 - x}; },
      [&](const Dot& d) { return Dot{static_cast<double>(w - 1) - d.x, d.y}; });
}

Sample flip_vertical(const Sample& s) {
  const std::size_t h = s.image.shape().h, w = s.image.shape().w;
  return remap_sample(
      s, h, w, [&](std::size_t y, std::size_t x) { return std::pair{h - 1 - y, x}; },
      [&](const Dot& d) { return Dot{d.x, static_cast<double>(h - 1) - d.y}; });
}

Sample rotate90(const Sample& s, int quarter_turns) {
  const int k = ((quarter_turns % 4) + 4) % 4;
  if (k == 0) return s;
  if (k == 2) return flip_vertical(flip_horizontal(s));
  const std::size_t h = s.image.shape().h, w = s.image.shape().w;
  const double hm = static_cast<double>(h - 1), wm = static_cast<double>(w - 1);
  if (k == 1) {
    // Counter-clockwise: output (y, x) of size (w, h) reads source (x, w-1-y).
    return remap_sample(
        s, w, h, [&](std::size_t y, std::size_t x) { return std::pair{x, w - 1 - y}; },
        [&](const Dot& d) { return Dot{d.y, wm - d.x}; });
  }
  return remap_sample(
      s, w, h, [&](std::size_t y, std::size_t x) { return std::pair{h - 1 - x, y}; },
      [&](const Dot& d) { return Dot{hm - d.y, d.x}; });
}

DisplacementField random_displacement(std::size_t h, std::size_t w, const ElasticSpec& spec, Rng& rng) {
  const double g = spec.grid_spacing;
  const auto gh = static_cast<std::size_t>(std::ceil(static_cast<double>(h - 1) / g)) + 1;
  const auto gw = static_cast<std::size_t>(std::ceil(static_cast<double>(w - 1) / g)) + 1;
  std::vector<double> cx(gh * gw), cy(gh * gw);
  for (std::size_t i = 0; i < gh * gw; ++i) {
    cx[i] = rng.normal(0.0, spec.sigma);
    cy[i] = rng.normal(0.0, spec.sigma);
  }
  DisplacementField f{h, w, std::vector<double>(h * w), std::vector<double>(h * w)};
  for (std::size_t y = 0; y < h; ++y) {
    const double gy = static_cast<double>(y) / g;
    const auto y0 = std::min(static_cast<std::size_t>(gy), gh - 1);
    const std::size_t y1 = std::min(y0 + 1, gh - 1);
    const double ty = gy - static_cast<double>(y0);
    for (std::size_t x = 0; x < w; ++x) {
      const double gx = static_cast<double>(x) / g;
      const auto x0 = std::min(static_cast<std::size_t>(gx), gw - 1);
      const std::size_t x1 = std::min(x0 + 1, gw - 1);
      const double tx = gx - static_cast<double>(x0);
      auto lerp = [&](const std::vector<double>& c) {
        const double top = c[y0 * gw + x0] * (1 - tx) + c[y0 * gw + x1] * tx;
        const double bot = c[y1 * gw + x0] * (1 - tx) + c[y1 * gw + x1] * tx;
        return top * (1 - ty) + bot * ty;
      };
      f.dx[y * w + x] = lerp(cx);
      f.dy[y * w + x] = lerp(cy);
    }
  }
  return f;
}

namespace {

// Bilinear sample of one plane; out-of-image taps clamp to the edge or read zero.
double bilinear(std::span<const float> plane, std::size_t h, std::size_t w, double y, double x, bool zero_outside) {
  const double fy = std::floor(y), fx = std::floor(x);
  const double ty = y - fy, tx = x - fx;
  double acc = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const double wgt = (dy ? ty : 1 - ty) * (dx ? tx : 1 - tx);
      if (wgt == 0.0) continue;
      long yy = static_cast<long>(fy) + dy, xx = static_cast<long>(fx) + dx;
      const bool inside = yy >= 0 && xx >= 0 && yy < static_cast<long>(h) && xx < static_cast<long>(w);
      if (!inside) {
        if (zero_outside) continue;
        yy = std::clamp(yy, 0L, static_cast<long>(h) - 1);
        xx = std::clamp(xx, 0L, static_cast<long>(w) - 1);
      }
      acc += wgt * plane[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
    }
  }
  return acc;
}

}  // namespace

Sample warp(const Sample& in, const DisplacementField& f) {
  const Shape& s = in.image.shape();
  if (f.h != s.h || f.w != s.w) throw ShapeError("warp: displacement field does not match the image");
  const std::size_t h = s.h, w = s.w;
  Sample out;
  out.id = in.id;
  out.image = Tensor<float>(s);
  for (std::size_t c = 0; c < s.c; ++c) {
    auto src = in.image.plane(0, c);
    auto dst = out.image.plane(0, c);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t p = y * w + x;
        dst[p] = static_cast<float>(bilinear(src, h, w, static_cast<double>(y) + f.dy[p],
                                             static_cast<double>(x) + f.dx[p], false));
      }
    }
  }
  if (in.labels) {
    out.labels = LabelMap(in.labels->shape());
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t p = y * w + x;
        const long sy = std::clamp(std::lround(static_cast<double>(y) + f.dy[p]), 0L, static_cast<long>(h) - 1);
        const long sx = std::clamp(std::lround(static_cast<double>(x) + f.dx[p]), 0L, static_cast<long>(w) - 1);
        (*out.labels)[p] = (*in.labels)[static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)];
      }
    }
  }
  if (!in.density.empty()) {
    out.density = Tensor<float>(in.density.shape());
    auto src = in.density.plane(0, 0);
    double before = 0.0, after = 0.0;
    std::vector<double> warped(h * w);
    for (std::size_t p = 0; p < h * w; ++p) before += src[p];
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t p = y * w + x;
        warped[p] = bilinear(src, h, w, static_cast<double>(y) + f.dy[p], static_cast<double>(x) + f.dx[p], true);
        after += warped[p];
      }
    }
    const double k = after > 0.0 ? before / after : 0.0;
    for (std::size_t p = 0; p < h * w; ++p) out.density[p] = static_cast<float>(warped[p] * k);
  }
  // A dot at q moves to the p solving p + d(p) = q; a few fixed-point steps suffice for smooth fields.
  for (const Dot& q : in.dots) {
    Dot p = q;
    for (int it = 0; it < 8; ++it) {
      const auto py = static_cast<std::size_t>(std::clamp(std::lround(p.y), 0L, static_cast<long>(h) - 1));
      const auto px = static_cast<std::size_t>(std::clamp(std::lround(p.x), 0L, static_cast<long>(w) - 1));
      p.x = std::clamp(q.x - f.dx[py * w + px], 0.0, static_cast<double>(w - 1));
      p.y = std::clamp(q.y - f.dy[py * w + px], 0.0, static_cast<double>(h - 1));
    }
    out.dots.push_back(p);
  }
  return out;
}

Sample augment(const Sample& sample, const AugmentationSpec& spec, Rng& rng) {
  Sample out = sample;
  if (spec.flips) {
    if (rng.below(2) == 1) out = flip_horizontal(out);
    if (rng.below(2) == 1) out = flip_vertical(out);
  }
  if (spec.rotations) {
    const bool square = out.image.shape().h == out.image.shape().w;
    const int turns = square ? static_cast<int>(rng.below(4)) : 2 * static_cast<int>(rng.below(2));
    out = rotate90(out, turns);
  }
  if (spec.elastic.enabled && spec.elastic.sigma > 0.0) {
    const DisplacementField f = random_displacement(out.image.shape().h, out.image.shape().w, spec.elastic, rng);
    out = warp(out, f);
  }
  return out;
}

}  // namespace ctxh
