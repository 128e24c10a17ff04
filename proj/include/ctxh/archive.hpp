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

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxh/tensor.hpp"

namespace ctxh {

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

/// Contents of a tensor archive: a JSON header followed by named tensors.
struct Archive {
  nlohmann::json header;
  std::vector<NamedTensor> tensors;

  /// Throws FormatError when no tensor has this name.
  const Tensor<float>& at(const std::string& name) const;
};

inline constexpr std::uint32_t kArchiveVersion = 1;

/// Binary layout, all integers little-endian:
///   "CTXH" | u32 version | u32 header length | header (UTF-8 JSON)
///   then per tensor: u32 name length | name | u8 rank | rank x u32 dims | f32 data
/// Tensors are always written with rank 4. The file is written to a temporary
/// sibling and renamed into place.
void write_archive(const std::filesystem::path& path, const Archive& archive);

/// Throws FormatError carrying the byte offset of the first problem (bad
/// magic, unsupported version, truncation, malformed header or dims).
Archive read_archive(const std::filesystem::path& path);

}  // namespace ctxh
