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

#include "ctxh/hourglass.hpp"

#include <algorithm>
#include <set>

#include "ctxh/ops.hpp"
#include "ctxh/rng.hpp"

namespace ctxh {

namespace {

std::string link_field(std::size_t i) { return "network.contextual_links[" + std::to_string(i) + "]"; }

}  // namespace

void HourglassConfig::validate() const {
  if (depth < 1) throw ConfigError("network.depth", "must be >= 1");
  if (depth > 16) throw ConfigError("network.depth", "must be <= 16");
  if (base_filters < 1) throw ConfigError("network.base_filters", "must be >= 1");
  if (in_channels < 1) throw ConfigError("network.in_channels", "must be >= 1");
  if (out_channels < 1) throw ConfigError("network.out_channels", "must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("network.kernel", "must be a positive odd integer");
  if (head == HeadKind::kDensity && out_channels != 1) {
    throw ConfigError("network.out_channels", "a density head has exactly one output channel");
  }
  if (head == HeadKind::kSegmentation && out_channels < 2) {
    throw ConfigError("network.out_channels", "a segmentation head needs at least two classes");
  }
  if (!contextual_links) return;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t i = 0; i < contextual_links->size(); ++i) {
    const StageLink& l = (*contextual_links)[i];
    if (!is_decoder_stage(l.target)) {
      throw ConfigError(link_field(i), "target stage " + std::to_string(l.target) + " is not a decoder stage (" +
                                           std::to_string(depth + 1) + ".." + std::to_string(2 * depth) + ")");
    }
    if (l.source >= l.target) {
      throw ConfigError(link_field(i), "source stage " + std::to_string(l.source) + " is not evaluated before target " +
                                           std::to_string(l.target));
    }
    if (stage_level(l.source) < stage_level(l.target)) {
      throw ConfigError(link_field(i), "source stage " + std::to_string(l.source) +
                                           " is spatially larger than target stage " + std::to_string(l.target));
    }
    if (!seen.insert({l.source, l.target}).second) throw ConfigError(link_field(i), "duplicate link");
  }
}

std::size_t HourglassConfig::stage_level(std::size_t s) const {
  if (s >= stage_count()) throw ContractError("stage index " + std::to_string(s) + " out of range");
  return s <= depth ? s : 2 * depth - s;
}

std::size_t HourglassConfig::stage_channels(std::size_t s) const {
  return base_filters << stage_level(s);
}

std::string HourglassConfig::stage_name(std::size_t s) const {
  if (s < depth) return "enc" + std::to_string(s);
  if (s == depth) return "bottleneck";
  return "dec" + std::to_string(s - depth);
}

std::vector<StageLink> HourglassConfig::default_links() const {
  std::vector<StageLink> links;
  for (std::size_t k = 1; k <= depth; ++k) links.push_back({depth, depth + k});
  return links;
}

template <typename T>
typename Network<T>::Conv Network<T>::add_conv(const std::string& name, std::size_t out, std::size_t in,
                                               std::size_t k, std::uint64_t seed) {
  const Rng init = Rng(seed).derive("init");
  const Shape ws{out, in, k, k};
  Rng rng = init.derive(name + ".weight");
  Tensor<T> w = config_.init == InitKind::kXavier ? xavier_init<T>(ws, in * k * k, out * k * k, rng)
                                                  : he_uniform_init<T>(ws, in * k * k, rng);
  params_.push_back({name + ".weight", std::move(w), {}});
  params_.push_back({name + ".bias", zeros<T>({1, out, 1, 1}), {}});
  return {params_.size() - 2, params_.size() - 1};
}

template <typename T>
Network<T>::Network(HourglassConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  if (!config_.contextual_links) config_.contextual_links.emplace();
  const HourglassConfig& c = config_;
  const std::size_t k = c.kernel;

  std::size_t in = c.in_channels;
  for (std::size_t s = 0; s <= c.depth; ++s) {
    const std::size_t ch = c.stage_channels(s);
    const std::string name = c.stage_name(s);
    Stage st{};
    st.conv1 = add_conv(name + ".conv1", ch, in, k, seed);
    st.conv2 = add_conv(name + ".conv2", ch, ch, k, seed);
    stages_.push_back(std::move(st));
    in = ch;
  }
  for (std::size_t s = c.depth + 1; s < c.stage_count(); ++s) {
    const std::size_t ch = c.stage_channels(s);
    const std::string name = c.stage_name(s);
    Stage st{};
    st.up = add_conv(name + ".up", ch, in, 2, seed);
    st.conv1 = add_conv(name + ".conv1", ch, c.mirror_shortcuts ? 2 * ch : ch, k, seed);
    st.conv2 = add_conv(name + ".conv2", ch, ch, k, seed);
    for (const StageLink& l : *c.contextual_links) {
      if (l.target != s) continue;
      st.context.emplace_back(
          l.source, add_conv(name + ".context" + std::to_string(l.source), ch, c.stage_channels(l.source), k, seed));
    }
    stages_.push_back(std::move(st));
    in = ch;
  }
  head_ = add_conv("head", c.out_channels, in, 1, seed);
}

template <typename T>
Parameter<T>& Network<T>::parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ContractError("no parameter named " + name);
}

template <typename T>
const Parameter<T>& Network<T>::parameter(const std::string& name) const {
  return const_cast<Network*>(this)->parameter(name);
}

template <typename T>
std::size_t Network<T>::parameter_count() const noexcept {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
void Network<T>::check_input(const Shape& input) const {
  if (input.c != config_.in_channels) {
    throw ShapeError("network expects " + std::to_string(config_.in_channels) + " input channels, got " +
                     std::to_string(input.c));
  }
  const std::size_t m = std::size_t{1} << config_.depth;
  if (input.h % m != 0 || input.w % m != 0) {
    const std::size_t ph = (input.h + m - 1) / m * m;
    const std::size_t pw = (input.w + m - 1) / m * m;
    throw ShapeError("input " + std::to_string(input.h) + "x" + std::to_string(input.w) +
                     " is not divisible by " + std::to_string(m) + "; pad to " + std::to_string(ph) + "x" +
                     std::to_string(pw));
  }
}

template <typename T>
std::vector<StageShape> Network<T>::plan(const Shape& input) const {
  check_input(input);
  std::vector<StageShape> out;
  for (std::size_t s = 0; s < config_.stage_count(); ++s) {
    const std::size_t level = config_.stage_level(s);
    out.push_back({config_.stage_name(s), {input.n, config_.stage_channels(s), input.h >> level, input.w >> level}});
  }
  out.push_back({"head", {input.n, config_.out_channels, input.h, input.w}});
  return out;
}

template <typename T>
Var<T> Network<T>::forward(Tape<T>& tape, Var<T> x, bool track_params, std::vector<StageShape>* trace) {
  check_input(x.shape());
  std::vector<Var<T>> bound(params_.size());
  auto param = [&](std::size_t i) {
    if (!bound[i].valid()) bound[i] = track_params ? tape.watch(params_[i]) : tape.constant(params_[i].value);
    return bound[i];
  };
  auto conv = [&](Var<T> in, const Conv& c) { return conv2d_same(in, param(c.weight), param(c.bias)); };
  auto record = [&](std::size_t s, const Var<T>& v) {
    if (trace) trace->push_back({config_.stage_name(s), v.shape()});
  };

  const std::size_t depth = config_.depth;
  std::vector<Var<T>> outputs(config_.stage_count());
  Var<T> h = x;
  for (std::size_t s = 0; s <= depth; ++s) {
    if (s > 0) h = maxpool2(h);
    h = selu(conv(h, stages_[s].conv1));
    h = selu(conv(h, stages_[s].conv2));
    outputs[s] = h;
    record(s, h);
  }
  for (std::size_t s = depth + 1; s < config_.stage_count(); ++s) {
    const Stage& st = stages_[s];
    Var<T> up = transposed_conv2d(h, param(st.up->weight), param(st.up->bias), 2);
    Var<T> in = config_.mirror_shortcuts ? concat_channels(outputs[2 * depth - s], up) : up;
    h = selu(conv(in, st.conv1));
    if (st.context.empty()) {
      h = selu(conv(h, st.conv2));
    } else {
      std::vector<ContextSource<T>> sources;
      for (const auto& [src, bank] : st.context) {
        sources.push_back({outputs[src], param(bank.weight), param(bank.bias)});
      }
      h = contextual_conv(h, param(st.conv2.weight), param(st.conv2.bias),
                          std::span<const ContextSource<T>>(sources));
    }
    outputs[s] = h;
    record(s, h);
  }
  Var<T> out = conv(h, head_);
  if (trace) trace->push_back({"head", out.shape()});
  return out;
}

template <typename T>
Tensor<T> Network<T>::predict(const Tensor<T>& x) {
  Tape<T> tape;
  return forward(tape, tape.constant(x), false).value();
}

template <typename T>
Network<T> build_unet(const HourglassConfig& config, std::uint64_t seed) {
  if (config.contextual_links && !config.contextual_links->empty()) {
    throw ConfigError("network.contextual_links", "a plain U-Net takes no contextual links");
  }
  HourglassConfig c = config;
  c.contextual_links.emplace();
  return Network<T>(std::move(c), seed);
}

template <typename T>
Network<T> build_contextual_unet(HourglassConfig config, std::uint64_t seed) {
  if (!config.contextual_links) config.contextual_links = config.default_links();
  return Network<T>(std::move(config), seed);
}

template class Network<float>;
template class Network<double>;
template Network<float> build_unet<float>(const HourglassConfig&, std::uint64_t);
template Network<double> build_unet<double>(const HourglassConfig&, std::uint64_t);
template Network<float> build_contextual_unet<float>(HourglassConfig, std::uint64_t);
template Network<double> build_contextual_unet<double>(HourglassConfig, std::uint64_t);

}  // namespace ctxh
