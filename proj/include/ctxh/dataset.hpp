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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxh/density.hpp"
#include "ctxh/ops.hpp"
#include "ctxh/tensor.hpp"

namespace ctxh {

enum class Task { kSegment, kCount };

std::string_view task_name(Task t) noexcept;
/// Accepts "segment" or "count"; throws ConfigError on anything else.
Task parse_task(std::string_view name, const std::string& field = "task");

/// One image with its target: a label map for segmentation, dots plus the
/// derived density map for counting.
struct Sample {
  std::string id;
  Tensor<float> image;             // (1, c, h, w), values in [0, 1]
  std::optional<LabelMap> labels;  // (1, 1, h, w)
  std::vector<Dot> dots;
  Tensor<float> density;           // (1, 1, h, w); empty unless counting

  /// Count target (number of dots).
  double count() const noexcept { return static_cast<double>(dots.size()); }
};

enum class Split { kTrain, kVal, kTest };

std::string_view split_name(Split s) noexcept;
Split parse_split(std::string_view name, const std::string& field = "split");

struct SplitSpec {
  enum class Mode { kSequential, kRandom };
  Mode mode = Mode::kSequential;
  std::uint64_t seed = 0;  // random mode only
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  const std::vector<std::size_t>& operator[](Split s) const;
};

/// Sequential mode takes the first `train` indices, then the next `val`, then
/// the next `test`. Random mode does the same over a seeded permutation.
/// Throws ConfigError when the counts exceed the dataset.
SplitIndices resolve_split(const SplitSpec& spec, std::size_t dataset_size);

struct Dataset {
  Task task = Task::kSegment;
  SplitSpec split;
  std::vector<Sample> samples;

  std::vector<Sample> subset(Split which) const;
};

/// Parses "x,y" lines (0-indexed pixels). A non-numeric first line is taken as
/// a header; blank lines are skipped. Throws DataError naming path and line.
std::vector<Dot> read_dots_csv(const std::filesystem::path& path);
void write_dots_csv(const std::filesystem::path& path, const std::vector<Dot>& dots);

/// Loads a dataset directory described by manifest.json. Counting samples get
/// their density map built from the dots with the given sigma.
Dataset load_dataset(const std::filesystem::path& dir, double sigma = 3.0);

/// Writes images as 16-bit PNG, labels as 8-bit PNG, dots as CSV, plus the manifest.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace ctxh
