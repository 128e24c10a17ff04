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

#include "ctxh/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

#include "ctxh/metrics.hpp"

namespace ctxh {

BenchmarkOptions::BenchmarkOptions() {
  network.depth = 3;
  network.base_filters = 24;
  network.in_channels = 1;
  network.out_channels = 1;
  network.head = HeadKind::kDensity;
  train.batch_size = 4;
  train.phase1 = {true, 60, 15};
  train.phase2 = {false, 20, 8};
}

std::vector<BenchmarkRow> run_benchmark(const BenchmarkOptions& options) {
  Dataset data = synth_counting_set(options.images, options.synth, Rng(options.data_seed).derive("synth"));
  const std::vector<Sample> val = data.subset(Split::kVal);
  const std::vector<Sample> test = data.subset(Split::kTest);
  double mean_count = 0.0;
  for (const Sample& s : test) mean_count += s.count();
  if (!test.empty()) mean_count /= static_cast<double>(test.size());

  std::vector<BenchmarkRow> rows;
  for (Model model : options.models) {
    for (std::uint64_t seed : options.seeds) {
      HourglassConfig config = options.network;
      config.contextual_links.reset();
      Network<float> net = model == Model::kUnet ? build_unet<float>(config, seed)
                                                 : build_contextual_unet<float>(config, seed);
      TrainOptions topts;
      topts.seed = seed;
      topts.output_dir = options.output_dir / (std::string(model_name(model)) + "-seed" + std::to_string(seed));
      topts.checkpoint_metadata = {{"model", std::string(model_name(model))}, {"seed", seed}};
      const auto start = std::chrono::steady_clock::now();
      const TrainReport report =
          train(net, data, options.train, options.optimizer, options.augmentation, topts);
      BenchmarkRow row;
      row.model = model;
      row.seed = seed;
      row.parameters = net.parameter_count();
      row.epochs = report.epochs.size();
      row.best_epoch = report.best_epoch;
      row.val_mae = evaluate_counting(net, val, options.train.target_scale);
      row.test_mae = test.empty() ? 0.0 : evaluate_counting(net, test, options.train.target_scale);
      row.mean_count = mean_count;
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rows.push_back(row);
    }
  }
  return rows;
}

std::string benchmark_table(const std::vector<BenchmarkRow>& rows) {
  std::string out;
  char line[200];
  std::snprintf(line, sizeof line, "%-16s %6s %8s %7s %5s %9s %9s %9s %8s\n", "model", "seed", "params", "epochs",
                "best", "val_mae", "test_mae", "rel_mae", "seconds");
  out += line;
  std::map<std::string, std::vector<double>> by_model;
  for (const auto& r : rows) {
    const std::string name(model_name(r.model));
    std::snprintf(line, sizeof line, "%-16s %6llu %8zu %7zu %5zu %9.4f %9.4f %8.2f%% %8.1f\n", name.c_str(),
                  static_cast<unsigned long long>(r.seed), r.parameters, r.epochs, r.best_epoch, r.val_mae,
                  r.test_mae, r.mean_count > 0 ? 100.0 * r.test_mae / r.mean_count : 0.0, r.seconds);
    out += line;
    by_model[name].push_back(r.test_mae);
  }
  out += "\n";
  for (const auto& [name, maes] : by_model) {
    double mean = 0.0;
    for (double m : maes) mean += m;
    mean /= static_cast<double>(maes.size());
    double var = 0.0;
    for (double m : maes) var += (m - mean) * (m - mean);
    const double sd = maes.size() > 1 ? std::sqrt(var / static_cast<double>(maes.size() - 1)) : 0.0;
    std::snprintf(line, sizeof line, "%-16s test_mae mean %.4f sd %.4f over %zu seeds\n", name.c_str(), mean, sd,
                  maes.size());
    out += line;
  }
  return out;
}

nlohmann::json to_json(const BenchmarkRow& r) {
  return {{"model", std::string(model_name(r.model))},
          {"seed", r.seed},
          {"parameters", r.parameters},
          {"epochs", r.epochs},
          {"best_epoch", r.best_epoch},
          {"val_mae", r.val_mae},
          {"test_mae", r.test_mae},
          {"mean_count", r.mean_count},
          {"seconds", r.seconds}};
}

}  // namespace ctxh
