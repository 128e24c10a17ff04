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
#include <optional>
#include <string>
#include <vector>

#include "ctxh/autodiff.hpp"
#include "ctxh/init.hpp"
#include "ctxh/tensor.hpp"

namespace ctxh {

enum class HeadKind {
  kSegmentation,  // raw per-class logits; softmax lives in the loss
  kDensity,       // single unbounded density channel
};

/// Contextual link between two stages, by stage index.
///
/// Stages are numbered in evaluation order: encoder stages 0..depth-1, the
/// bottleneck at `depth`, and decoder stages depth+1..2*depth (depth+1 is the
/// first decoder stage, right after the bottleneck). The source map must be
/// spatially no larger than the target, and the target must be a decoder stage.
struct StageLink {
  std::size_t source = 0;
  std::size_t target = 0;
  friend bool operator==(const StageLink&, const StageLink&) = default;
};

struct HourglassConfig {
  std::size_t depth = 2;
  std::size_t base_filters = 8;
  std::size_t in_channels = 1;
  std::size_t out_channels = 2;
  std::size_t kernel = 3;
  bool mirror_shortcuts = true;
  /// Unset means "builder default": none for U-Net, bottleneck -> every decoder
  /// stage for the contextual U-Net. An explicit empty list means no links.
  std::optional<std::vector<StageLink>> contextual_links;
  HeadKind head = HeadKind::kSegmentation;
  InitKind init = InitKind::kXavier;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  std::size_t stage_count() const noexcept { return 2 * depth + 1; }
  std::size_t bottleneck_stage() const noexcept { return depth; }
  bool is_decoder_stage(std::size_t s) const noexcept { return s > depth && s <= 2 * depth; }
  /// Feature channels produced by stage s.
  std::size_t stage_channels(std::size_t s) const;
  /// log2 of the downsampling factor of stage s's output.
  std::size_t stage_level(std::size_t s) const;
  std::string stage_name(std::size_t s) const;

  /// bottleneck -> each decoder stage.
  std::vector<StageLink> default_links() const;

  friend bool operator==(const HourglassConfig&, const HourglassConfig&) = default;
};

/// Shape of one named intermediate map, as predicted or as observed.
struct StageShape {
  std::string name;
  Shape shape;
  friend bool operator==(const StageShape&, const StageShape&) = default;
};

/// An instantiated U-Net or contextual U-Net.
///
/// Parameter order and names are a pure function of the config, so they stay
/// stable across save/load. Weights come from named sub-streams of the seed,
/// so a parameter's initial value does not depend on which other layers exist.
template <typename T>
class Network {
 public:
  /// Builds with config.contextual_links taken literally (unset = none).
  Network(HourglassConfig config, std::uint64_t seed);

  const HourglassConfig& config() const noexcept { return config_; }

  std::vector<Parameter<T>>& parameters() noexcept { return params_; }
  const std::vector<Parameter<T>>& parameters() const noexcept { return params_; }
  Parameter<T>& parameter(const std::string& name);
  const Parameter<T>& parameter(const std::string& name) const;
  /// Total number of scalar weights and biases.
  std::size_t parameter_count() const noexcept;
  void zero_grad();

  /// Records the forward pass. With track_params=false the weights enter the
  /// tape as constants (inference). `trace`, when given, receives the observed
  /// shape of every stage output in evaluation order.
  Var<T> forward(Tape<T>& tape, Var<T> x, bool track_params = true, std::vector<StageShape>* trace = nullptr);

  /// Untracked forward pass returning the head output.
  Tensor<T> predict(const Tensor<T>& x);

  /// Stage shapes forward() will produce for an input of this shape, without
  /// computing anything. Throws ShapeError for inputs the network cannot take.
  std::vector<StageShape> plan(const Shape& input) const;

  /// Throws ShapeError unless the input channels match and h, w are divisible by 2^depth.
  void check_input(const Shape& input) const;

 private:
  struct Conv {
    std::size_t weight;
    std::size_t bias;
  };
  struct Stage {
    std::optional<Conv> up;  // decoder stages only
    Conv conv1;
    Conv conv2;
    std::vector<std::pair<std::size_t, Conv>> context;  // (source stage, small bank)
  };

  Conv add_conv(const std::string& name, std::size_t out, std::size_t in, std::size_t k, std::uint64_t seed);

  HourglassConfig config_;
  std::vector<Parameter<T>> params_;
  std::vector<Stage> stages_;
  Conv head_{};
};

/// Plain U-Net. Requires contextual_links to be unset or empty.
template <typename T>
Network<T> build_unet(const HourglassConfig& config, std::uint64_t seed);

/// Contextual U-Net. Unset contextual_links default to bottleneck -> every decoder stage.
template <typename T>
Network<T> build_contextual_unet(HourglassConfig config, std::uint64_t seed);

}  // namespace ctxh
