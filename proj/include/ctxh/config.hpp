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
#include <string>

#include <nlohmann/json.hpp>

#include "ctxh/augment.hpp"
#include "ctxh/dataset.hpp"
#include "ctxh/hourglass.hpp"
#include "ctxh/optim.hpp"
#include "ctxh/train.hpp"

namespace ctxh {

enum class Model { kUnet, kContextualUnet };

std::string_view model_name(Model m) noexcept;

struct DataConfig {
  std::filesystem::path dir;
  double sigma = 3.0;  // density Gaussian width for counting
};

/// Everything a training run needs, fully resolved.
struct RunConfig {
  Task task = Task::kSegment;
  Model model = Model::kContextualUnet;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  DataConfig data;
  HourglassConfig network;
  TrainSpec train;
  OptimizerConfig optimizer;
  AugmentationSpec augmentation;
  int threads = 1;
};

/// JSON codecs. Readers reject unknown keys and wrong types with a ConfigError
/// whose field is the dotted path under `prefix`.
nlohmann::json to_json(const HourglassConfig& c);
HourglassConfig hourglass_from_json(const nlohmann::json& j, const std::string& prefix = "network");
nlohmann::json to_json(const OptimizerConfig& c);
OptimizerConfig optimizer_from_json(const nlohmann::json& j, const std::string& prefix = "optimizer");
nlohmann::json to_json(const AugmentationSpec& a);
AugmentationSpec augmentation_from_json(const nlohmann::json& j, const std::string& prefix = "augmentation");
nlohmann::json to_json(const TrainSpec& t);
nlohmann::json to_json(const RunConfig& c);

/// Builds a RunConfig from parsed JSON. Relative paths are taken relative to
/// `base_dir`. Task-dependent defaults (head, output channels, batch size) are
/// filled in before validation.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Reads and validates a config file. Syntax errors report line and column.
RunConfig load_run_config(const std::filesystem::path& path);

/// Network exactly as the run config describes it, seeded from config.seed.
Network<float> build_network(const RunConfig& config);

}  // namespace ctxh
