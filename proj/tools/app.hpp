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
#include <iosfwd>
#include <optional>
#include <string>

namespace ctxh::app {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kVerificationFailed = 1,
  kUsageError = 2,
  kNumericalError = 3,
};

/// Parses the command line and dispatches to one of the commands below.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct TrainArgs {
  std::filesystem::path config;
  bool resume = false;
  std::optional<int> threads;
  std::optional<std::size_t> stop_after;  // epochs, for resumable partial runs
};
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

int cmd_infer(const std::filesystem::path& checkpoint, const std::string& input_glob,
              const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

int cmd_gradcheck(const std::string& scope, std::uint64_t seed, const std::optional<std::string>& inject_fault,
                  std::ostream& out, std::ostream& err);

int cmd_synth(const std::string& task, std::size_t n, const std::filesystem::path& out_dir, std::uint64_t seed,
              std::ostream& out, std::ostream& err);

int cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir, const std::string& split,
             std::ostream& out, std::ostream& err);

}  // namespace ctxh::app
