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

#include "ctxh/density.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ctxh/error.hpp"

namespace ctxh {

template <typename T>
Tensor<T> density_from_dots(std::span<const Dot> dots, std::size_t h, std::size_t w, double sigma) {
  if (!(sigma > 0.0)) throw ContractError("density_from_dots: sigma must be > 0");
  Tensor<T> out({1, 1, h, w});
  const auto radius = static_cast<long>(std::ceil(4.0 * sigma));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> window;
  for (std::size_t d = 0; d < dots.size(); ++d) {
    const Dot& p = dots[d];
    if (!(p.x >= 0.0 && p.x < static_cast<double>(w) && p.y >= 0.0 && p.y < static_cast<double>(h))) {
      throw DataError("dot " + std::to_string(d) + " at (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                      ") lies outside the " + std::to_string(h) + "x" + std::to_string(w) + " image");
    }
    const long cx = std::lround(p.x);
    const long cy = std::lround(p.y);
    const long r0 = std::max(0L, cy - radius);
    const long r1 = std::min(static_cast<long>(h) - 1, cy + radius);
    const long c0 = std::max(0L, cx - radius);
    const long c1 = std::min(static_cast<long>(w) - 1, cx + radius);
    window.assign(static_cast<std::size_t>((r1 - r0 + 1) * (c1 - c0 + 1)), 0.0);
    double mass = 0.0;
    std::size_t k = 0;
    for (long r = r0; r <= r1; ++r) {
      for (long c = c0; c <= c1; ++c, ++k) {
        const double dx = static_cast<double>(c) - p.x;
        const double dy = static_cast<double>(r) - p.y;
        window[k] = std::exp(-(dx * dx + dy * dy) * inv);
        mass += window[k];
      }
    }
    if (mass <= 0.0) {  // sigma far below the pixel pitch: all mass on the nearest pixel
      const auto r = static_cast<std::size_t>(std::clamp(cy, r0, r1));
      const auto c = static_cast<std::size_t>(std::clamp(cx, c0, c1));
      out(0, 0, r, c) += T(1);
      continue;
    }
    k = 0;
    for (long r = r0; r <= r1; ++r) {
      for (long c = c0; c <= c1; ++c, ++k) {
        out(0, 0, static_cast<std::size_t>(r), static_cast<std::size_t>(c)) += static_cast<T>(window[k] / mass);
      }
    }
  }
  return out;
}

template Tensor<float> density_from_dots<float>(std::span<const Dot>, std::size_t, std::size_t, double);
template Tensor<double> density_from_dots<double>(std::span<const Dot>, std::size_t, std::size_t, double);

}  // namespace ctxh
