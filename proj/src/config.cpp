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

#include "ctxh/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ctxh/error.hpp"

namespace ctxh {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view model_name(Model m) noexcept { return m == Model::kUnet ? "unet" : "contextual-unet"; }

namespace {

// Reads keys from one JSON object, remembering which were consumed so that
// leftovers can be reported as unknown fields.
class Fields {
 public:
  Fields(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(prefix_, "must be an object");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& raw(const std::string& key) {
    if (!has(key)) throw ConfigError(path(key), "missing required field");
    return j_.at(key);
  }

  std::uint64_t u64(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(path(key), "expected a non-negative integer");
    if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0) throw ConfigError(path(key), "must be >= 0");
    return v.get<std::uint64_t>();
  }
  std::size_t size(const std::string& key, std::size_t fallback) {
    return has(key) ? static_cast<std::size_t>(u64(key)) : fallback;
  }
  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(path(key), "expected a number");
    return v.get<double>();
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(path(key), "expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(path(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
  }
  json object(const std::string& key) {
    if (!has(key)) return json::object();
    const json& v = j_.at(key);
    if (!v.is_object()) throw ConfigError(path(key), "expected an object");
    return v;
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.contains(item.key())) throw ConfigError(path(item.key()), "unknown field");
    }
  }

 private:
  json j_;
  std::string prefix_;
  std::set<std::string> used_;
};

PhaseSpec phase_from_json(const json& j, const std::string& prefix, PhaseSpec d) {
  Fields f(j, prefix);
  d.augmented = f.boolean("augmented", d.augmented);
  d.max_epochs = f.size("max_epochs", d.max_epochs);
  d.patience = f.size("patience", d.patience);
  f.finish();
  return d;
}

json to_json(const PhaseSpec& p) {
  return {{"augmented", p.augmented}, {"max_epochs", p.max_epochs}, {"patience", p.patience}};
}

}  // namespace

json to_json(const HourglassConfig& c) {
  json j = {{"depth", c.depth},
            {"base_filters", c.base_filters},
            {"in_channels", c.in_channels},
            {"out_channels", c.out_channels},
            {"kernel", c.kernel},
            {"mirror_shortcuts", c.mirror_shortcuts},
            {"head", c.head == HeadKind::kDensity ? "density" : "segmentation"},
            {"init", c.init == InitKind::kHeUniform ? "he-uniform" : "xavier"}};
  if (c.contextual_links) {
    json links = json::array();
    for (const StageLink& l : *c.contextual_links) links.push_back({{"source", l.source}, {"target", l.target}});
    j["contextual_links"] = std::move(links);
  }
  return j;
}

HourglassConfig hourglass_from_json(const json& j, const std::string& prefix) {
  Fields f(j, prefix);
  HourglassConfig c;
  c.depth = f.size("depth", c.depth);
  c.base_filters = f.size("base_filters", c.base_filters);
  c.in_channels = f.size("in_channels", c.in_channels);
  c.out_channels = f.size("out_channels", c.out_channels);
  c.kernel = f.size("kernel", c.kernel);
  c.mirror_shortcuts = f.boolean("mirror_shortcuts", c.mirror_shortcuts);
  const std::string head = f.string("head", "segmentation");
  if (head == "segmentation") {
    c.head = HeadKind::kSegmentation;
  } else if (head == "density") {
    c.head = HeadKind::kDensity;
  } else {
    throw ConfigError(f.path("head"), "expected segmentation or density");
  }
  const std::string init = f.string("init", "xavier");
  if (init == "xavier") {
    c.init = InitKind::kXavier;
  } else if (init == "he-uniform") {
    c.init = InitKind::kHeUniform;
  } else {
    throw ConfigError(f.path("init"), "expected xavier or he-uniform");
  }
  if (f.has("contextual_links")) {
    const json& links = f.raw("contextual_links");
    if (!links.is_array()) throw ConfigError(f.path("contextual_links"), "expected an array");
    c.contextual_links.emplace();
    for (std::size_t i = 0; i < links.size(); ++i) {
      const std::string lp = f.path("contextual_links") + "[" + std::to_string(i) + "]";
      Fields lf(links[i], lp);
      c.contextual_links->push_back({static_cast<std::size_t>(lf.u64("source")),
                                     static_cast<std::size_t>(lf.u64("target"))});
      lf.finish();
    }
  }
  f.finish();
  return c;
}

json to_json(const OptimizerConfig& c) {
  return {{"kind", c.kind == OptimizerConfig::Kind::kAdam ? "adam" : "sgd-momentum"},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay}};
}

OptimizerConfig optimizer_from_json(const json& j, const std::string& prefix) {
  Fields f(j, prefix);
  OptimizerConfig c;
  const std::string kind = f.string("kind", "adam");
  if (kind == "adam") {
    c.kind = OptimizerConfig::Kind::kAdam;
  } else if (kind == "sgd-momentum") {
    c.kind = OptimizerConfig::Kind::kSgdMomentum;
  } else {
    throw ConfigError(f.path("kind"), "expected adam or sgd-momentum");
  }
  c.learning_rate = f.number("learning_rate", c.learning_rate);
  c.beta1 = f.number("beta1", c.beta1);
  c.beta2 = f.number("beta2", c.beta2);
  c.epsilon = f.number("epsilon", c.epsilon);
  c.momentum = f.number("momentum", c.momentum);
  c.weight_decay = f.number("weight_decay", c.weight_decay);
  f.finish();
  c.validate();
  return c;
}

json to_json(const AugmentationSpec& a) {
  return {{"flips", a.flips},
          {"rotations", a.rotations},
          {"elastic",
           {{"enabled", a.elastic.enabled}, {"grid_spacing", a.elastic.grid_spacing}, {"sigma", a.elastic.sigma}}}};
}

AugmentationSpec augmentation_from_json(const json& j, const std::string& prefix) {
  Fields f(j, prefix);
  AugmentationSpec a;
  a.flips = f.boolean("flips", a.flips);
  a.rotations = f.boolean("rotations", a.rotations);
  Fields e(f.object("elastic"), f.path("elastic"));
  a.elastic.enabled = e.boolean("enabled", a.elastic.enabled);
  a.elastic.grid_spacing = e.number("grid_spacing", a.elastic.grid_spacing);
  a.elastic.sigma = e.number("sigma", a.elastic.sigma);
  e.finish();
  f.finish();
  a.validate();
  return a;
}

json to_json(const TrainSpec& t) {
  json j = {{"phase1", to_json(t.phase1)},
            {"phase2", to_json(t.phase2)},
            {"batch_size", t.batch_size},
            {"target_scale", t.target_scale}};
  if (t.max_steps) j["max_steps"] = *t.max_steps;
  return j;
}

json to_json(const RunConfig& c) {
  return {{"task", std::string(task_name(c.task))},
          {"model", std::string(model_name(c.model))},
          {"seed", c.seed},
          {"output_dir", c.output_dir.string()},
          {"data", {{"dir", c.data.dir.string()}, {"sigma", c.data.sigma}}},
          {"network", to_json(c.network)},
          {"train", to_json(c.train)},
          {"optimizer", to_json(c.optimizer)},
          {"augmentation", to_json(c.augmentation)},
          {"threads", c.threads}};
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  Fields f(j, "");
  RunConfig c;
  c.task = parse_task(f.string("task"), "task");
  const std::string model = f.string("model", "contextual-unet");
  if (model == "unet") {
    c.model = Model::kUnet;
  } else if (model == "contextual-unet") {
    c.model = Model::kContextualUnet;
  } else {
    throw ConfigError("model", "expected unet or contextual-unet");
  }
  if (!f.has("seed")) throw ConfigError("seed", "missing required field (training runs must be seeded)");
  c.seed = f.u64("seed");
  auto resolve = [&](const fs::path& p) { return p.is_absolute() ? p : base_dir / p; };
  c.output_dir = resolve(f.string("output_dir"));

  Fields d(f.object("data"), "data");
  c.data.dir = resolve(d.string("dir"));
  c.data.sigma = d.number("sigma", c.data.sigma);
  d.finish();
  if (!(c.data.sigma > 0.0)) throw ConfigError("data.sigma", "must be > 0");
  if (!fs::is_directory(c.data.dir)) throw ConfigError("data.dir", c.data.dir.string() + " is not a directory");
  if (!fs::exists(c.data.dir / "manifest.json")) {
    throw ConfigError("data.dir", (c.data.dir / "manifest.json").string() + " does not exist");
  }

  json net = f.object("network");
  const bool counting = c.task == Task::kCount;
  if (!net.contains("head")) net["head"] = counting ? "density" : "segmentation";
  if (!net.contains("out_channels")) net["out_channels"] = counting ? 1 : 2;
  c.network = hourglass_from_json(net, "network");
  if ((c.network.head == HeadKind::kDensity) != counting) {
    throw ConfigError("network.head", "does not match task " + std::string(task_name(c.task)));
  }
  if (c.model == Model::kUnet && c.network.contextual_links && !c.network.contextual_links->empty()) {
    throw ConfigError("network.contextual_links", "a plain U-Net takes no contextual links");
  }
  if (c.model == Model::kContextualUnet && !c.network.contextual_links) {
    c.network.contextual_links = c.network.default_links();
  }
  if (c.model == Model::kUnet) c.network.contextual_links.emplace();
  c.network.validate();

  Fields t(f.object("train"), "train");
  c.train.batch_size = t.size("batch_size", counting ? 4 : 1);
  c.train.phase1 = phase_from_json(t.object("phase1"), "train.phase1", {true, 100, 10});
  c.train.phase2 = phase_from_json(t.object("phase2"), "train.phase2", {false, 100, 10});
  if (t.has("max_steps")) c.train.max_steps = static_cast<std::size_t>(t.u64("max_steps"));
  c.train.target_scale = t.number("target_scale", c.train.target_scale);
  t.finish();
  c.train.validate();

  c.optimizer = optimizer_from_json(f.object("optimizer"), "optimizer");
  c.augmentation = augmentation_from_json(f.object("augmentation"), "augmentation");
  c.threads = static_cast<int>(f.size("threads", 1));
  if (c.threads < 1) throw ConfigError("threads", "must be >= 1");
  f.finish();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", path.string() + " does not exist or is unreadable");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ConfigError("config", path.string() + ":" + std::to_string(line) + ":" + std::to_string(column) +
                                    ": JSON syntax error: " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

Network<float> build_network(const RunConfig& config) {
  return config.model == Model::kUnet ? build_unet<float>(config.network, config.seed)
                                      : build_contextual_unet<float>(config.network, config.seed);
}

}  // namespace ctxh
