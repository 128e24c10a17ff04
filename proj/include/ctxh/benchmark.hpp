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
#include <vector>

#include "ctxh/config.hpp"
#include "ctxh/synth.hpp"

namespace ctxh {

/// Counting comparison of the plain and contextual U-Net on one synthetic set.
struct BenchmarkOptions {
  std::size_t images = 98;
  SynthCountingOptions synth;
  std::uint64_t data_seed = 1;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<Model> models = {Model::kUnet, Model::kContextualUnet};
  HourglassConfig network;  // links are replaced per model
  TrainSpec train;
  OptimizerConfig optimizer;
  AugmentationSpec augmentation;
  std::filesystem::path output_dir;
  BenchmarkOptions();
};

struct BenchmarkRow {
  Model model = Model::kUnet;
  std::uint64_t seed = 0;
  std::size_t parameters = 0;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double val_mae = 0.0;
  double test_mae = 0.0;
  double mean_count = 0.0;  // mean true count on the test split
  double seconds = 0.0;
};

/// Trains every (model, seed) pair on the same data and split and evaluates
/// the restored best network on the test split. Each run writes its training
/// outputs to output_dir/<model>-seed<seed>.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkOptions& options);

/// Side-by-side table: one line per run, then mean and standard deviation of
/// the test MAE per model.
std::string benchmark_table(const std::vector<BenchmarkRow>& rows);

nlohmann::json to_json(const BenchmarkRow& row);

}  // namespace ctxh
