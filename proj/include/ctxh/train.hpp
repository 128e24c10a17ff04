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
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxh/augment.hpp"
#include "ctxh/dataset.hpp"
#include "ctxh/hourglass.hpp"
#include "ctxh/optim.hpp"

namespace ctxh {

struct PhaseSpec {
  bool augmented = true;
  std::size_t max_epochs = 100;
  /// The phase stops once this many consecutive epochs fail to improve the
  /// phase's best validation loss.
  std::size_t patience = 10;
  friend bool operator==(const PhaseSpec&, const PhaseSpec&) = default;
};

/// Early stopping on a loss that should decrease: the first value always
/// counts as an improvement, and stopping is due once `patience` consecutive
/// values fail to beat the best so far.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);
  EarlyStopping(std::size_t patience, double best, std::size_t since_improvement);

  /// Records one value; returns whether it improved on the best.
  bool update(double loss);
  bool should_stop() const noexcept { return since_improvement_ >= patience_; }
  double best() const noexcept { return best_; }
  std::size_t since_improvement() const noexcept { return since_improvement_; }

 private:
  std::size_t patience_;
  double best_;
  std::size_t since_improvement_ = 0;
};

struct TrainSpec {
  PhaseSpec phase1{true, 100, 10};
  PhaseSpec phase2{false, 100, 10};
  std::size_t batch_size = 1;
  /// Hard cap on optimizer steps across both phases.
  std::optional<std::size_t> max_steps;
  /// Density targets are multiplied by this before the MSE loss; predicted
  /// counts are divided by it.
  double target_scale = 100.0;

  void validate() const;
  friend bool operator==(const TrainSpec&, const TrainSpec&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;        // 1-based, global across phases
  std::size_t phase = 0;        // 1 or 2
  std::size_t phase_epoch = 0;  // 1-based within the phase
  double train_loss = 0.0;      // mean over the epoch's samples, as trained (augmented in phase 1)
  double val_loss = 0.0;
  double metric = 0.0;  // validation pixel accuracy (segment) or MAE (count)
  bool improved = false;
  std::size_t steps = 0;  // optimizer steps so far
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;
  std::filesystem::path checkpoint;
  std::size_t phase1_stop_epoch = 0;  // global epoch index at which each phase ended (0 = did not run)
  std::size_t phase2_stop_epoch = 0;
  std::size_t steps = 0;
  double final_train_metric = 0.0;  // best checkpoint on the undistorted train split
  double final_val_metric = 0.0;
  bool completed = false;  // false when interrupted by stop_after_epochs
};

struct TrainOptions {
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  /// Extra JSON stored in every checkpoint's metadata.
  nlohmann::json checkpoint_metadata = nlohmann::json::object();
  /// Stop (resumably) after this many epochs in this invocation.
  std::optional<std::size_t> stop_after_epochs;
  /// Continue from output_dir/last.state.
  bool resume = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Two-phase training: phase 1 on augmented data, phase 2 on undistorted
/// data continuing with the same optimizer state, each with early stopping on
/// validation loss.
/// The globally best network is saved to output_dir/best.ckpt whenever the
/// validation loss improves, and restored into `net` at the end of each phase.
/// Writes report.jsonl (one record per epoch), summary.json and last.state.
/// Sample order and augmentation come from named sub-streams of the seed, so
/// a run is reproducible for a fixed seed and thread count.
TrainReport train(Network<float>& net, const Dataset& data, const TrainSpec& spec, const OptimizerConfig& opt,
                  const AugmentationSpec& aug, const TrainOptions& options);

/// Loss of a single sample under the task's loss, without gradients.
double sample_loss(Network<float>& net, const Sample& sample, Task task, double target_scale);

/// JSON forms used by report.jsonl and summary.json.
nlohmann::json to_json(const EpochRecord& r);
nlohmann::json summary_json(const TrainReport& r);

}  // namespace ctxh
