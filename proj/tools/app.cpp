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

#include "app.hpp"

#include <glob.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "ctxh/checkpoint.hpp"
#include "ctxh/config.hpp"
#include "ctxh/error.hpp"
#include "ctxh/gradcheck.hpp"
#include "ctxh/image_io.hpp"
#include "ctxh/metrics.hpp"
#include "ctxh/parallel.hpp"
#include "ctxh/synth.hpp"
#include "ctxh/train.hpp"

namespace ctxh::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Maps library errors onto the exit-code contract.
int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<fs::path> out;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  ::globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) throw InputError("cannot expand input pattern " + pattern);
  out.erase(std::remove_if(out.begin(), out.end(), [](const fs::path& p) { return !fs::is_regular_file(p); }),
            out.end());
  return out;
}

void write_lines(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw InputError(path.string() + ": cannot open for writing");
  f << text;
}

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = load_run_config(args.config);
    set_num_threads(args.threads.value_or(config.threads));
    const Dataset data = load_dataset(config.data.dir, config.data.sigma);
    if (data.task != config.task) {
      throw ConfigError("task", "config says " + std::string(task_name(config.task)) + " but the dataset holds " +
                                    std::string(task_name(data.task)) + " samples");
    }
    Network<float> net = build_network(config);
    fs::create_directories(config.output_dir);
    write_lines(config.output_dir / "config.json", to_json(config).dump(2) + "\n");

    TrainOptions options;
    options.output_dir = config.output_dir;
    options.seed = config.seed;
    options.resume = args.resume;
    options.stop_after_epochs = args.stop_after;
    options.checkpoint_metadata = {
        {"model", std::string(model_name(config.model))}, {"seed", config.seed}, {"sigma", config.data.sigma}};
    options.on_epoch = [&](const EpochRecord& r) {
      out << "epoch " << r.epoch << " phase " << r.phase << " train_loss " << fmt(r.train_loss) << " val_loss "
          << fmt(r.val_loss) << " metric " << fmt(r.metric) << (r.improved ? " *" : "") << std::endl;
    };
    const TrainReport report = train(net, data, config.train, config.optimizer, config.augmentation, options);
    if (!report.completed) {
      out << "stopped after " << report.epochs.size() << " epochs; continue with --resume\n";
      return kOk;
    }
    out << "best epoch " << report.best_epoch << " val_loss " << fmt(report.best_val_loss) << '\n'
        << "phase 1 stopped at epoch " << report.phase1_stop_epoch << ", phase 2 at epoch "
        << report.phase2_stop_epoch << '\n'
        << "final train metric " << fmt(report.final_train_metric) << ", val metric "
        << fmt(report.final_val_metric) << '\n'
        << "checkpoint " << report.checkpoint.string() << '\n';
    return kOk;
  });
}

int cmd_infer(const fs::path& checkpoint, const std::string& input_glob, const fs::path& out_dir, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    json meta;
    Network<float> net = load_checkpoint<float>(checkpoint, &meta);
    const std::vector<fs::path> inputs = expand_glob(input_glob);
    if (inputs.empty()) throw InputError("no input files match " + input_glob);
    fs::create_directories(out_dir);
    const bool counting = net.config().head == HeadKind::kDensity;
    const double target_scale = meta.value("target_scale", 100.0);
    for (const fs::path& path : inputs) {
      const Tensor<float> image = load_image(path);
      const Tensor<float> pred = net.predict(image);
      const Shape& s = pred.shape();
      const std::string stem = path.stem().string();
      if (!counting) {
        const LabelMap labels = argmax_channels(pred);
        std::vector<std::uint8_t> px(labels.size());
        for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(labels[i]);
        save_png_gray8(out_dir / (stem + ".png"), px, s.h, s.w);
        out << stem << '\n';
        continue;
      }
      std::vector<double> density(pred.size());
      double count = 0.0;
      for (std::size_t i = 0; i < density.size(); ++i) {
        density[i] = static_cast<double>(pred[i]) / target_scale;
        count += density[i];
      }
      const auto [lo, hi] = std::minmax_element(density.begin(), density.end());
      const double offset = *lo;
      const double step = *hi > *lo ? (*hi - *lo) / 65535.0 : 1.0;
      std::vector<std::uint16_t> px(density.size());
      for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = static_cast<std::uint16_t>(std::clamp(std::lround((density[i] - offset) / step), 0L, 65535L));
      }
      save_png_gray16(out_dir / (stem + ".png"), px, s.h, s.w);
      write_lines(out_dir / (stem + ".txt"), "offset " + fmt(offset) + "\nscale " + fmt(step) + "\ncount " +
                                                 fmt(count) + "\n");
      out << stem << '\t' << fmt(count) << '\n';
    }
    return kOk;
  });
}

int cmd_gradcheck(const std::string& scope, std::uint64_t seed, const std::optional<std::string>& inject_fault,
                  std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    GradCheckOptions options;
    options.seed = seed;
    options.inject_fault = inject_fault;
    std::vector<GradCheckEntry> entries;
    if (scope == "ops") {
      entries = run_op_gradchecks(options);
    } else if (scope == "network") {
      if (inject_fault) throw ConfigError("inject-fault", "only available with --scope ops");
      entries = run_network_gradchecks(options);
    } else {
      throw ConfigError("scope", "expected ops or network");
    }
    std::vector<std::string> failing;
    for (const auto& e : entries) {
      char line[160];
      std::snprintf(line, sizeof line, "%-40s %.3e  %s", e.name.c_str(), e.max_rel_error, e.passed ? "ok" : "FAIL");
      out << line << '\n';
      if (!e.passed) failing.push_back(e.name + " (worst at " + e.worst + ")");
    }
    if (failing.empty()) {
      out << "all " << entries.size() << " checks below " << options.tolerance << '\n';
      return kOk;
    }
    err << "gradient check failed for:\n";
    for (const auto& f : failing) err << "  " << f << '\n';
    return kVerificationFailed;
  });
}

int cmd_synth(const std::string& task, std::size_t n, const fs::path& out_dir, std::uint64_t seed, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const Task t = parse_task(task, "task");
    const Rng rng = Rng(seed).derive("synth");
    const Dataset ds = t == Task::kCount ? synth_counting_set(n, SynthCountingOptions{}, rng)
                                         : synth_segmentation_set(n, SynthSegmentationOptions{}, rng);
    save_dataset(ds, out_dir);
    out << "wrote " << n << " " << task << " samples to " << out_dir.string() << " (train " << ds.split.train
        << ", val " << ds.split.val << ", test " << ds.split.test << ")\n";
    return kOk;
  });
}

int cmd_eval(const fs::path& checkpoint, const fs::path& data_dir, const std::string& split, std::ostream& out,
             std::ostream& err) {
  return guarded(err, [&] {
    const Split which = parse_split(split, "split");
    json meta;
    Network<float> net = load_checkpoint<float>(checkpoint, &meta);
    const Dataset data = load_dataset(data_dir, meta.value("sigma", 3.0));
    const bool counting = net.config().head == HeadKind::kDensity;
    if (counting != (data.task == Task::kCount)) {
      throw ConfigError("data", "checkpoint and dataset are for different tasks");
    }
    const std::vector<Sample> samples = data.subset(which);
    if (samples.empty()) throw ConfigError("split", "the " + split + " split of " + data_dir.string() + " is empty");
    if (counting) {
      out << "mae " << fmt(evaluate_counting(net, samples, meta.value("target_scale", 100.0))) << '\n';
    } else {
      const SegmentationMetrics m = evaluate_segmentation(net, samples);
      out << "pixel_accuracy " << fmt(m.pixel_accuracy) << '\n' << "mean_iou " << fmt(m.mean_iou) << '\n';
    }
    out << "samples " << samples.size() << '\n';
    return kOk;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Hourglass networks with contextual convolutions"};
  cli.require_subcommand(1);

  TrainArgs train_args;
  int threads = 0;
  std::size_t stop_after = 0;
  auto* train = cli.add_subcommand("train", "Train a network from a JSON config");
  train->add_option("--config", train_args.config, "Run configuration")->required();
  train->add_flag("--resume", train_args.resume, "Continue from <output_dir>/last.state");
  auto* threads_opt = train->add_option("--threads", threads, "Worker threads (default: config value)")
                          ->check(CLI::PositiveNumber);
  auto* stop_opt =
      train->add_option("--stop-after", stop_after, "Stop after this many epochs (resumable)")->check(CLI::PositiveNumber);

  fs::path checkpoint, out_dir, data_dir;
  std::string input_glob, split, scope, task;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::string fault;

  auto* infer = cli.add_subcommand("infer", "Run a checkpoint on images");
  infer->add_option("--checkpoint", checkpoint)->required();
  infer->add_option("--input", input_glob, "Image path or glob pattern")->required();
  infer->add_option("--out", out_dir)->required();

  auto* gradcheck = cli.add_subcommand("gradcheck", "Finite-difference gradient checks in double precision");
  gradcheck->add_option("--scope", scope)->required()->check(CLI::IsMember({"ops", "network"}));
  gradcheck->add_option("--seed", seed)->required();
  auto* fault_opt = gradcheck->add_option("--inject-fault", fault, "Corrupt the backward rule of this op");

  auto* synth = cli.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--task", task)->required()->check(CLI::IsMember({"segment", "count"}));
  synth->add_option("--n", n)->required();
  synth->add_option("--out", out_dir)->required();
  synth->add_option("--seed", seed)->required();

  auto* eval = cli.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--data", data_dir)->required();
  eval->add_option("--split", split)->required()->check(CLI::IsMember({"train", "val", "test"}));

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return cli.exit(e, out, err) == 0 ? kOk : kUsageError;
  }

  if (*train) {
    if (*threads_opt) train_args.threads = threads;
    if (*stop_opt) train_args.stop_after = stop_after;
    return cmd_train(train_args, out, err);
  }
  if (*infer) return cmd_infer(checkpoint, input_glob, out_dir, out, err);
  if (*gradcheck) {
    return cmd_gradcheck(scope, seed, *fault_opt ? std::optional<std::string>(fault) : std::nullopt, out, err);
  }
  if (*synth) return cmd_synth(task, n, out_dir, seed, out, err);
  return cmd_eval(checkpoint, data_dir, split, out, err);
}

}  // namespace ctxh::app
