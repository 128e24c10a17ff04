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
#include <optional>
#include <string>
#include <vector>

namespace ctxh {

struct GradCheckOptions {
  std::uint64_t seed = 0;
  double epsilon = 1e-4;
  double tolerance = 1e-4;
  /// Name of an op whose backward rule is deliberately scaled by 1.5 (test fixture).
  std::optional<std::string> inject_fault;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  bool finite = true;
  bool passed = false;
  std::string worst;  // which input/parameter produced max_rel_error
};

/// Names of the differentiable operators covered by the op suite, in report order.
std::vector<std::string> gradcheck_op_names();

/// One entry per operator: the worst error over all of its differentiable inputs.
/// Throws ConfigError if inject_fault names no operator.
std::vector<GradCheckEntry> run_op_gradchecks(const GradCheckOptions& options);

/// One entry per parameter tensor of a depth-2, base-2 contextual U-Net on an
/// 8x8 input under a cross-entropy loss.
std::vector<GradCheckEntry> run_network_gradchecks(const GradCheckOptions& options);

}  // namespace ctxh
