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

#include "ctxh/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "ctxh/autodiff.hpp"
#include "ctxh/error.hpp"
#include "ctxh/hourglass.hpp"
#include "ctxh/ops.hpp"
#include "ctxh/rng.hpp"

namespace ctxh {

namespace {

using Vars = std::vector<Var<double>>;
using Builder = std::function<Var<double>(Tape<double>&, const Vars&)>;

constexpr double kFaultFactor = 1.5;
// Inputs are redrawn until every SeLU input and every 2x2 pooling gap on the
// tape is at least this far from a kink, ten times the default epsilon.
constexpr double kKinkMargin = 1e-3;
constexpr int kMaxDraws = 200;

struct OpCase {
  std::string name;
  std::vector<std::string> input_names;
  std::vector<Shape> input_shapes;
  Builder build;
};

Tensor<double> random_tensor(const Shape& s, Rng& rng) {
  Tensor<double> t(s);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

LabelMap random_labels(const Shape& s, std::size_t classes, Rng rng) {
  LabelMap labels(s);
  for (auto& v : labels.data()) v = static_cast<std::int32_t>(rng.below(classes));
  return labels;
}

// Distance of the current point from the nearest non-differentiable point of
// any SeLU or max-pool node on the tape.
double kink_margin(const Tape<double>& tape) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t id = 0; id < tape.size(); ++id) {
    const std::string& op = tape.op_name(id);
    if (op == "selu") {
      for (double v : tape.value(tape.inputs(id).front()).data()) margin = std::min(margin, std::abs(v));
    } else if (op == "maxpool2") {
      const Tensor<double>& x = tape.value(tape.inputs(id).front());
      const Shape& s = x.shape();
      for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t c = 0; c < s.c; ++c) {
          for (std::size_t i = 0; i + 1 < s.h; i += 2) {
            for (std::size_t j = 0; j + 1 < s.w; j += 2) {
              double v[4] = {x(n, c, i, j), x(n, c, i, j + 1), x(n, c, i + 1, j), x(n, c, i + 1, j + 1)};
              std::sort(v, v + 4);
              margin = std::min(margin, v[3] - v[2]);
            }
          }
        }
      }
    }
  }
  return margin;
}

std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  cases.push_back({"conv2d_same",
                   {"x", "weight", "bias"},
                   {{2, 3, 6, 5}, {4, 3, 3, 3}, {1, 4, 1, 1}},
                   [](Tape<double>&, const Vars& v) { return conv2d_same(v[0], v[1], v[2]); }});
  cases.push_back({"transposed_conv2d",
                   {"x", "weight", "bias"},
                   {{2, 3, 3, 4}, {4, 3, 2, 2}, {1, 4, 1, 1}},
                   [](Tape<double>&, const Vars& v) { return transposed_conv2d(v[0], v[1], v[2], 2); }});
  cases.push_back({"maxpool2", {"x"}, {{2, 3, 6, 8}}, [](Tape<double>&, const Vars& v) { return maxpool2(v[0]); }});
  cases.push_back({"selu", {"x"}, {{2, 3, 5, 5}}, [](Tape<double>&, const Vars& v) { return selu(v[0]); }});
  cases.push_back({"concat_channels",
                   {"a", "b"},
                   {{2, 2, 4, 4}, {2, 3, 4, 4}},
                   [](Tape<double>&, const Vars& v) { return concat_channels(v[0], v[1]); }});
  cases.push_back({"context_gather",
                   {"small"},
                   {{2, 3, 3, 2}},
                   [](Tape<double>&, const Vars& v) { return context_gather(v[0], 7, 5); }});
  cases.push_back({"contextual_conv",
                   {"large", "weight_large", "bias_large", "small_a", "weight_a", "bias_a", "small_b", "weight_b",
                    "bias_b"},
                   {{2, 3, 6, 6}, {4, 3, 3, 3}, {1, 4, 1, 1}, {2, 2, 3, 3}, {4, 2, 3, 3}, {1, 4, 1, 1}, {2, 5, 2, 2},
                    {4, 5, 1, 1}, {1, 4, 1, 1}},
                   [](Tape<double>&, const Vars& v) {
                     const std::vector<ContextSource<double>> sources = {{v[3], v[4], v[5]}, {v[6], v[7], v[8]}};
                     return contextual_conv(v[0], v[1], v[2], std::span<const ContextSource<double>>(sources));
                   }});
  const LabelMap labels = random_labels({2, 1, 4, 5}, 3, Rng(7).derive("labels"));
  cases.push_back({"softmax_cross_entropy",
                   {"logits"},
                   {{2, 3, 4, 5}},
                   [labels](Tape<double>&, const Vars& v) { return softmax_cross_entropy(v[0], labels); }});
  Rng target_rng = Rng(7).derive("target");
  const Tensor<double> target = random_tensor({2, 1, 5, 4}, target_rng);
  cases.push_back({"mse_loss",
                   {"pred"},
                   {{2, 1, 5, 4}},
                   [target](Tape<double>&, const Vars& v) { return mse_loss(v[0], target); }});
  return cases;
}

// Reduces a non-scalar output to a scalar through fixed random weights.
Var<double> reduce(Tape<double>& tape, Var<double> out, const Tensor<double>& weights) {
  if (out.shape() == Shape{1, 1, 1, 1}) return out;
  return sum(mul(out, tape.constant(weights)));
}

void merge(GradCheckEntry& entry, const GradCheckResult& r, const std::string& what) {
  const double err = r.finite ? r.max_rel_error : std::numeric_limits<double>::infinity();
  if (!r.finite) entry.finite = false;
  if (entry.worst.empty() || err > entry.max_rel_error) {
    entry.max_rel_error = err;
    entry.worst = what + "[" + std::to_string(r.worst_index) + "]";
  }
}

}  // namespace

std::vector<std::string> gradcheck_op_names() {
  std::vector<std::string> names;
  for (const auto& c : op_cases()) names.push_back(c.name);
  return names;
}

std::vector<GradCheckEntry> run_op_gradchecks(const GradCheckOptions& options) {
  const std::vector<OpCase> cases = op_cases();
  if (options.inject_fault &&
      std::none_of(cases.begin(), cases.end(), [&](const OpCase& c) { return c.name == *options.inject_fault; })) {
    throw ConfigError("inject_fault", "unknown operator \"" + *options.inject_fault + "\"");
  }
  const Rng root = Rng(options.seed).derive("gradcheck");
  std::vector<GradCheckEntry> entries;
  for (const OpCase& oc : cases) {
    const bool faulty = options.inject_fault && *options.inject_fault == oc.name;
    auto forward = [&](Tape<double>& tape, const Vars& vars) {
      Var<double> out = oc.build(tape, vars);
      return faulty ? scaled_gradient(out, kFaultFactor) : out;
    };

    // Draw inputs away from kinks.
    std::vector<Tensor<double>> inputs;
    Shape out_shape;
    for (int draw = 0;; ++draw) {
      if (draw == kMaxDraws) throw ContractError("gradcheck: no kink-free inputs found for " + oc.name);
      Rng rng = root.derive(oc.name, static_cast<std::uint64_t>(draw));
      inputs.clear();
      for (const Shape& s : oc.input_shapes) inputs.push_back(random_tensor(s, rng));
      Tape<double> tape;
      Vars vars;
      for (const auto& t : inputs) vars.push_back(tape.constant(t));
      out_shape = forward(tape, vars).shape();
      if (kink_margin(tape) >= kKinkMargin) break;
    }
    Rng wrng = root.derive(oc.name).derive("weights");
    const Tensor<double> weights = random_tensor(out_shape, wrng);

    GradCheckEntry entry;
    entry.name = oc.name;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const ScalarFn f = [&](Tape<double>& tape, Var<double> x) {
        Vars vars;
        for (std::size_t j = 0; j < inputs.size(); ++j) vars.push_back(j == i ? x : tape.constant(inputs[j]));
        return reduce(tape, forward(tape, vars), weights);
      };
      merge(entry, finite_difference_check(f, inputs[i], options.epsilon), oc.input_names[i]);
    }
    entry.passed = entry.finite && entry.max_rel_error < options.tolerance;
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<GradCheckEntry> run_network_gradchecks(const GradCheckOptions& options) {
  HourglassConfig config;
  config.depth = 2;
  config.base_filters = 2;
  config.in_channels = 1;
  config.out_channels = 2;
  const Rng root = Rng(options.seed).derive("gradcheck-network");
  const Shape input_shape{1, 1, 8, 8};
  const LabelMap labels = random_labels(input_shape, 2, root.derive("labels"));

  std::optional<Network<double>> net;
  Tensor<double> input;
  auto loss_of = [&](Tape<double>& tape, bool track) {
    return softmax_cross_entropy(net->forward(tape, tape.constant(input), track), labels);
  };
  for (int draw = 0;; ++draw) {
    if (draw == kMaxDraws) throw ContractError("gradcheck: no kink-free network instance found");
    net.emplace(build_contextual_unet<double>(config, mix64(options.seed + static_cast<std::uint64_t>(draw))));
    Rng rng = root.derive("input", static_cast<std::uint64_t>(draw));
    input = random_tensor(input_shape, rng);
    Tape<double> tape;
    loss_of(tape, false);
    if (kink_margin(tape) >= kKinkMargin) break;
  }

  net->zero_grad();
  {
    Tape<double> tape;
    tape.backward(loss_of(tape, true));
  }
  auto loss_value = [&] {
    Tape<double> tape;
    return loss_of(tape, false).value()[0];
  };

  std::vector<GradCheckEntry> entries;
  for (auto& p : net->parameters()) {
    GradCheckEntry entry;
    entry.name = "network:" + p.name;
    GradCheckResult r;
    const double eps = options.epsilon;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double up = loss_value();
      p.value[i] = saved - eps;
      const double down = loss_value();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p.grad[i];
      if (!std::isfinite(numeric) || !std::isfinite(analytic)) {
        r.finite = false;
        r.worst_index = i;
        break;
      }
      const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      if (i == 0 || err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst_index = i;
        r.analytic_at_worst = analytic;
        r.numeric_at_worst = numeric;
      }
    }
    merge(entry, r, p.name);
    entry.passed = entry.finite && entry.max_rel_error < options.tolerance;
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace ctxh
