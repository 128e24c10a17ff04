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

#include <nlohmann/json.hpp>

#include "ctxh/hourglass.hpp"

namespace ctxh {

/// Saves the network config and every parameter (as float) in the CTXH
/// archive format, with `metadata` stored alongside the config.
template <typename T>
void save_checkpoint(const Network<T>& net, const std::filesystem::path& path,
                     const nlohmann::json& metadata = nlohmann::json::object());

/// Rebuilds the network from a checkpoint. Missing, extra or misshapen
/// parameters raise FormatError; nothing is returned on failure.
template <typename T>
Network<T> load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

}  // namespace ctxh
