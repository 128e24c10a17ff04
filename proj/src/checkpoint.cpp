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

#include "ctxh/checkpoint.hpp"

#include "ctxh/archive.hpp"
#include "ctxh/config.hpp"
#include "ctxh/error.hpp"

namespace ctxh {

template <typename T>
void save_checkpoint(const Network<T>& net, const std::filesystem::path& path, const nlohmann::json& metadata) {
  Archive a;
  a.header = {{"network", to_json(net.config())}, {"metadata", metadata}};
  for (const auto& p : net.parameters()) a.tensors.push_back({p.name, p.value.template cast<float>()});
  write_archive(path, a);
}

template <typename T>
Network<T> load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata) {
  const Archive a = read_archive(path);
  if (!a.header.is_object() || !a.header.contains("network")) {
    throw FormatError(12, "checkpoint header has no network config");
  }
  HourglassConfig config;
  try {
    config = hourglass_from_json(a.header.at("network"), "network");
  } catch (const ConfigError& e) {
    throw FormatError(12, std::string("checkpoint network config invalid: ") + e.what());
  }
  if (!config.contextual_links) config.contextual_links.emplace();
  Network<T> net(config, 0);
  auto& params = net.parameters();
  if (a.tensors.size() != params.size()) {
    throw FormatError(0, "checkpoint holds " + std::to_string(a.tensors.size()) + " tensors, network needs " +
                             std::to_string(params.size()));
  }
  for (auto& p : params) {
    const Tensor<float>& v = a.at(p.name);
    if (v.shape() != p.value.shape()) {
      throw FormatError(0, "parameter " + p.name + " has shape " + to_string(v.shape()) + ", expected " +
                               to_string(p.value.shape()));
    }
    p.value = v.template cast<T>();
  }
  if (metadata != nullptr) *metadata = a.header.value("metadata", nlohmann::json::object());
  return net;
}

template void save_checkpoint<float>(const Network<float>&, const std::filesystem::path&, const nlohmann::json&);
template void save_checkpoint<double>(const Network<double>&, const std::filesystem::path&, const nlohmann::json&);
template Network<float> load_checkpoint<float>(const std::filesystem::path&, nlohmann::json*);
template Network<double> load_checkpoint<double>(const std::filesystem::path&, nlohmann::json*);

}  // namespace ctxh
