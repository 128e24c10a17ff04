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

// Side-by-side counting benchmark of the plain and contextual U-Net.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "ctxh/benchmark.hpp"
#include "ctxh/error.hpp"
#include "ctxh/parallel.hpp"

int main(int argc, char** argv) {
  ctxh::BenchmarkOptions options;
  std::size_t phase1_epochs = options.train.phase1.max_epochs;
  std::size_t phase2_epochs = options.train.phase2.max_epochs;
  std::string json_path;
  int threads = 1;

  CLI::App cli{"Counting benchmark: unet vs contextual-unet over several seeds"};
  cli.add_option("--out", options.output_dir, "Directory for per-run training outputs")->required();
  cli.add_option("--images", options.images, "Synthetic images (default split 32/16/rest)");
  cli.add_option("--data-seed", options.data_seed);
  cli.add_option("--seeds", options.seeds, "Training seeds")->expected(1, -1);
  cli.add_option("--depth", options.network.depth);
  cli.add_option("--base-filters", options.network.base_filters);
  cli.add_option("--phase1-epochs", phase1_epochs);
  cli.add_option("--phase2-epochs", phase2_epochs);
  cli.add_option("--json", json_path, "Also write the rows as JSON lines");
  cli.add_option("--threads", threads)->check(CLI::PositiveNumber);
  CLI11_PARSE(cli, argc, argv);

  options.train.phase1.max_epochs = phase1_epochs;
  options.train.phase2.max_epochs = phase2_epochs;
  try {
    ctxh::set_num_threads(threads);
    const auto rows = ctxh::run_benchmark(options);
    std::cout << ctxh::benchmark_table(rows);
    if (!json_path.empty()) {
      std::ofstream f(json_path);
      for (const auto& r : rows) f << ctxh::to_json(r).dump() << '\n';
    }
  } catch (const ctxh::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const ctxh::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
