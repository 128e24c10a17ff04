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

#include <cstdint>
#include <filesystem>
#include <span>

#include "ctxh/tensor.hpp"

namespace ctxh {

/// Reads an 8- or 16-bit grayscale or RGB PNG or uncompressed TIFF into a
/// (1, c, h, w) tensor scaled to [0, 1] by the type maximum (255 or 65535).
/// Alpha channels are dropped. Throws InputError naming the path.
Tensor<float> load_image(const std::filesystem::path& path);

/// Raw integer pixel values of a single-channel 8-bit PNG (for label maps).
Tensor<std::int32_t> load_label_png(const std::filesystem::path& path);

/// Writes a grayscale PNG. `pixels` is row-major h*w.
void save_png_gray8(const std::filesystem::path& path, std::span<const std::uint8_t> pixels, std::size_t h,
                    std::size_t w);
void save_png_gray16(const std::filesystem::path& path, std::span<const std::uint16_t> pixels, std::size_t h,
                     std::size_t w);

/// Writes an uncompressed little-endian TIFF with 1 or 3 samples of 8 or 16 bits.
/// `samples` is interleaved row-major, values already in the target bit depth.
void save_tiff(const std::filesystem::path& path, std::span<const std::uint16_t> samples, std::size_t h,
               std::size_t w, std::size_t channels, int bits);

/// Quantizes a (1, 1, h, w) tensor in [0, 1] to 8 bits (clamped, rounded).
void save_image_gray8(const std::filesystem::path& path, const Tensor<float>& image);

}  // namespace ctxh
