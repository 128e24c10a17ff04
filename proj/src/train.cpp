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

#include "ctxh/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "ctxh/archive.hpp"
#include "ctxh/checkpoint.hpp"
#include "ctxh/config.hpp"
#include "ctxh/error.hpp"
#include "ctxh/metrics.hpp"
#include "ctxh/ops.hpp"
#include "ctxh/parallel.hpp"

namespace ctxh {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainSpec::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (phase1.patience < 1) throw ConfigError("train.phase1.patience", "must be >= 1");
  if (phase2.patience < 1) throw ConfigError("train.phase2.patience", "must be >= 1");
  if (!(target_scale > 0.0) || !std::isfinite(target_scale)) throw ConfigError("train.target_scale", "must be > 0");
}

EarlyStopping::EarlyStopping(std::size_t patience)
    : EarlyStopping(patience, std::numeric_limits<double>::infinity(), 0) {}

EarlyStopping::EarlyStopping(std::size_t patience, double best, std::size_t since_improvement)
    : patience_(patience), best_(best), since_improvement_(since_improvement) {
  if (patience < 1) throw ConfigError("patience", "must be >= 1");
}

bool EarlyStopping::update(double loss) {
  if (loss < best_) {
    best_ = loss;
    since_improvement_ = 0;
    return true;
  }
  ++since_improvement_;
  return false;
}

json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},           {"phase", r.phase},       {"phase_epoch", r.phase_epoch},
          {"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"metric", r.metric},
          {"improved", r.improved},     {"steps", r.steps}};
}

namespace {

EpochRecord record_from_json(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.phase = j.at("phase").get<std::size_t>();
  r.phase_epoch = j.at("phase_epoch").get<std::size_t>();
  r.train_loss = j.at("train_loss").get<double>();
  r.val_loss = j.at("val_loss").get<double>();
  r.metric = j.at("metric").get<double>();
  r.improved = j.at("improved").get<bool>();
  r.steps = j.at("steps").get<std::size_t>();
  return r;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// JSON has no infinity; "not yet seen" is stored as null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double finite_or_inf(const json& j) { return j.is_null() ? kInf : j.get<double>(); }

}  // namespace

json summary_json(const TrainReport& r) {
  return {{"best_val_loss", finite_or_null(r.best_val_loss)},
          {"best_epoch", r.best_epoch},
          {"checkpoint", r.checkpoint.filename().string()},
          {"phase1_stop_epoch", r.phase1_stop_epoch},
          {"phase2_stop_epoch", r.phase2_stop_epoch},
          {"epochs", r.epochs.size()},
          {"steps", r.steps},
          {"final_train_metric", r.final_train_metric},
          {"final_val_metric", r.final_val_metric},
          {"completed", r.completed}};
}

namespace {

Var<float> loss_on_batch(Network<float>& net, Tape<float>& tape, std::span<const Sample> samples, Task task,
                         double target_scale, bool track_params) {
  std::vector<Tensor<float>> images;
  for (const Sample& s : samples) images.push_back(s.image);
  const Var<float> x = tape.constant(stack_batch<float>(images));
  const Var<float> out = net.forward(tape, x, track_params);
  if (task == Task::kSegment) {
    std::vector<LabelMap> labels;
    for (const Sample& s : samples) {
      if (!s.labels) throw DataError("sample " + s.id + " has no label map");
      labels.push_back(*s.labels);
    }
    return softmax_cross_entropy(out, stack_batch<std::int32_t>(labels));
  }
  std::vector<Tensor<float>> targets;
  for (const Sample& s : samples) {
    if (s.density.empty()) throw DataError("sample " + s.id + " has no density map");
    targets.push_back(scale(s.density, static_cast<float>(target_scale)));
  }
  return mse_loss(out, stack_batch<float>(targets));
}

struct Evaluation {
  double loss = 0.0;
  double metric = 0.0;
};

// Loss and task metric over a split, one sample at a time so the result does
// not depend on batch composition.
Evaluation evaluate(Network<float>& net, std::span<const Sample> samples, Task task, double target_scale) {
  std::vector<double> losses(samples.size());
  std::vector<double> predicted(samples.size());
  std::vector<LabelMap> labels(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    Tape<float> tape;
    const Var<float> loss = loss_on_batch(net, tape, samples.subspan(i, 1), task, target_scale, false);
    losses[i] = loss.value()[0];
    // The head output is the input of the loss node.
    const Tensor<float>& out = tape.value(tape.inputs(loss.id()).front());
    if (task == Task::kSegment) {
      labels[i] = argmax_channels(out);
    } else {
      double mass = 0.0;
      for (float v : out.data()) mass += v;
      predicted[i] = mass / target_scale;
    }
  });
  Evaluation e;
  for (double l : losses) e.loss += l;
  e.loss /= static_cast<double>(std::max<std::size_t>(1, samples.size()));
  if (task == Task::kSegment) {
    ConfusionMatrix cm(net.config().out_channels);
    for (std::size_t i = 0; i < samples.size(); ++i) cm.add(labels[i], *samples[i].labels);
    e.metric = cm.metrics().pixel_accuracy;
  } else {
    std::vector<double> truth;
    for (const Sample& s : samples) truth.push_back(s.count());
    e.metric = mean_absolute_error(predicted, truth);
  }
  return e;
}

// Everything needed to continue a run after the last completed epoch.
struct Progress {
  std::size_t phase = 1;  // phase to run next; 3 once both are done
  bool phase_started = false;
  std::size_t phase_epoch = 0;
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double phase_best = kInf;
  std::size_t since_improvement = 0;
  double best_val = kInf;
  std::size_t best_epoch = 0;
  std::size_t phase1_stop = 0;
  std::size_t phase2_stop = 0;
  std::vector<EpochRecord> records;

  json to_json() const {
    json recs = json::array();
    for (const auto& r : records) recs.push_back(ctxh::to_json(r));
    return {{"phase", phase},
            {"phase_started", phase_started},
            {"phase_epoch", phase_epoch},
            {"epoch", epoch},
            {"steps", steps},
            {"phase_best", finite_or_null(phase_best)},
            {"since_improvement", since_improvement},
            {"best_val", finite_or_null(best_val)},
            {"best_epoch", best_epoch},
            {"phase1_stop", phase1_stop},
            {"phase2_stop", phase2_stop},
            {"records", std::move(recs)}};
  }

  static Progress from_json(const json& j) {
    Progress p;
    p.phase = j.at("phase").get<std::size_t>();
    p.phase_started = j.at("phase_started").get<bool>();
    p.phase_epoch = j.at("phase_epoch").get<std::size_t>();
    p.epoch = j.at("epoch").get<std::size_t>();
    p.steps = j.at("steps").get<std::size_t>();
    p.phase_best = finite_or_inf(j.at("phase_best"));
    p.since_improvement = j.at("since_improvement").get<std::size_t>();
    p.best_val = finite_or_inf(j.at("best_val"));
    p.best_epoch = j.at("best_epoch").get<std::size_t>();
    p.phase1_stop = j.at("phase1_stop").get<std::size_t>();
    p.phase2_stop = j.at("phase2_stop").get<std::size_t>();
    for (const auto& r : j.at("records")) p.records.push_back(record_from_json(r));
    return p;
  }
};

json run_identity(const TrainSpec& spec, const OptimizerConfig& opt, const AugmentationSpec& aug,
                  const HourglassConfig& net, std::uint64_t seed) {
  return {{"train", to_json(spec)},
          {"optimizer", to_json(opt)},
          {"augmentation", to_json(aug)},
          {"network", to_json(net)},
          {"seed", seed}};
}

void write_text(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError(tmp.string() + ": cannot open for writing");
    f << text;
    if (!f) throw InputError(tmp.string() + ": write failed");
  }
  fs::rename(tmp, path);
}

void write_report(const fs::path& dir, const std::vector<EpochRecord>& records) {
  std::string text;
  for (const auto& r : records) text += to_json(r).dump() + "\n";
  write_text(dir / "report.jsonl", text);
}

void save_state(const fs::path& path, const Progress& progress, const json& identity, const Network<float>& net,
                const Optimizer<float>& opt) {
  Archive a;
  a.header = {{"progress", progress.to_json()}, {"identity", identity}};
  for (const auto& p : net.parameters()) a.tensors.push_back({"param/" + p.name, p.value});
  opt.save_state(a);
  write_archive(path, a);
}

void restore_weights(Network<float>& net, const fs::path& checkpoint) {
  const Network<float> best = load_checkpoint<float>(checkpoint);
  auto& dst = net.parameters();
  const auto& src = best.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i].value = src[i].value;
}

}  // namespace

double sample_loss(Network<float>& net, const Sample& sample, Task task, double target_scale) {
  Tape<float> tape;
  return loss_on_batch(net, tape, std::span<const Sample>(&sample, 1), task, target_scale, false).value()[0];
}

TrainReport train(Network<float>& net, const Dataset& data, const TrainSpec& spec, const OptimizerConfig& opt_config,
                  const AugmentationSpec& aug, const TrainOptions& options) {
  spec.validate();
  opt_config.validate();
  aug.validate();
  if ((net.config().head == HeadKind::kDensity) != (data.task == Task::kCount)) {
    throw ConfigError("network.head", "does not match the dataset task " + std::string(task_name(data.task)));
  }
  const std::vector<Sample> train_set = data.subset(Split::kTrain);
  const std::vector<Sample> val_set = data.subset(Split::kVal);
  if (train_set.empty()) throw ConfigError("split.train", "training split is empty");
  if (val_set.empty()) throw ConfigError("split.val", "validation split is empty");
  for (const Sample& s : train_set) net.check_input(s.image.shape());
  for (const Sample& s : val_set) net.check_input(s.image.shape());

  const fs::path dir = options.output_dir;
  fs::create_directories(dir);
  const fs::path best_path = dir / "best.ckpt";
  const fs::path state_path = dir / "last.state";
  json metadata = options.checkpoint_metadata;
  metadata["task"] = std::string(task_name(data.task));
  metadata["target_scale"] = spec.target_scale;
  const json identity = run_identity(spec, opt_config, aug, net.config(), options.seed);

  Progress progress;
  Optimizer<float> opt(opt_config, net.parameters());
  if (options.resume) {
    const Archive state = read_archive(state_path);
    if (state.header.value("identity", json()) != identity) {
      throw ConfigError("resume", state_path.string() + " was written by a run with a different configuration or seed");
    }
    progress = Progress::from_json(state.header.at("progress"));
    for (auto& p : net.parameters()) {
      const Tensor<float>& v = state.at("param/" + p.name);
      require_same_shape(v.shape(), p.value.shape(), "resume");
      p.value = v;
    }
    opt.load_state(state, net.parameters());
  }

  const Rng root(options.seed);
  const Rng order_root = root.derive("order");
  const Rng augment_root = root.derive("augment");
  std::size_t epochs_this_call = 0;
  bool interrupted = false;
  auto steps_exhausted = [&] { return spec.max_steps && progress.steps >= *spec.max_steps; };

  for (std::size_t phase = 1; phase <= 2 && !interrupted; ++phase) {
    if (progress.phase > phase) continue;
    const PhaseSpec& ps = phase == 1 ? spec.phase1 : spec.phase2;
    if (!progress.phase_started) {
      // The optimizer state carries over: a fresh Adam would take a full
      // lr-sized step on every weight and undo phase 1.
      progress.phase_started = true;
      progress.phase_epoch = 0;
      progress.phase_best = kInf;
      progress.since_improvement = 0;
    }
    EarlyStopping stopper(ps.patience, progress.phase_best, progress.since_improvement);
    while (progress.phase_epoch < ps.max_epochs && !stopper.should_stop() && !steps_exhausted()) {
      if (options.stop_after_epochs && epochs_this_call >= *options.stop_after_epochs) {
        interrupted = true;
        break;
      }
      const std::size_t pe = progress.phase_epoch;
      const Rng epoch_order = order_root.derive("phase", phase).derive("epoch", pe);
      const Rng epoch_augment = augment_root.derive("phase", phase).derive("epoch", pe);
      Rng order_rng = epoch_order;
      const std::vector<std::size_t> order = order_rng.permutation(train_set.size());

      double loss_sum = 0.0;
      std::size_t seen = 0;
      for (std::size_t b = 0; b < order.size() && !steps_exhausted(); b += spec.batch_size) {
        const std::size_t end = std::min(order.size(), b + spec.batch_size);
        std::vector<Sample> batch;
        for (std::size_t k = b; k < end; ++k) {
          const Sample& s = train_set[order[k]];
          if (ps.augmented && aug.any()) {
            Rng r = epoch_augment.derive("position", k);
            batch.push_back(augment(s, aug, r));
          } else {
            batch.push_back(s);
          }
        }
        net.zero_grad();
        Tape<float> tape;
        const Var<float> loss = loss_on_batch(net, tape, batch, data.task, spec.target_scale, true);
        const double value = loss.value()[0];
        if (!std::isfinite(value)) {
          throw NumericalError("training loss became non-finite at epoch " + std::to_string(progress.epoch + 1) +
                               ", step " + std::to_string(progress.steps + 1));
        }
        tape.backward(loss);
        opt.step(net.parameters());
        ++progress.steps;
        loss_sum += value * static_cast<double>(batch.size());
        seen += batch.size();
      }

      const Evaluation val = evaluate(net, val_set, data.task, spec.target_scale);
      if (!std::isfinite(val.loss)) {
        throw NumericalError("validation loss became non-finite at epoch " + std::to_string(progress.epoch + 1));
      }
      EpochRecord rec;
      rec.epoch = ++progress.epoch;
      rec.phase = phase;
      rec.phase_epoch = ++progress.phase_epoch;
      rec.train_loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
      rec.val_loss = val.loss;
      rec.metric = val.metric;
      rec.improved = stopper.update(val.loss);
      rec.steps = progress.steps;
      progress.phase_best = stopper.best();
      progress.since_improvement = stopper.since_improvement();
      if (val.loss < progress.best_val) {
        progress.best_val = val.loss;
        progress.best_epoch = rec.epoch;
        save_checkpoint(net, best_path, metadata);
      }
      progress.records.push_back(rec);
      ++epochs_this_call;
      write_report(dir, progress.records);
      save_state(state_path, progress, identity, net, opt);
      if (options.on_epoch) options.on_epoch(rec);
    }
    if (interrupted) break;

    const bool ran = !progress.records.empty() && progress.records.back().phase == phase;
    (phase == 1 ? progress.phase1_stop : progress.phase2_stop) = ran ? progress.epoch : 0;
    if (progress.best_epoch > 0) restore_weights(net, best_path);
    progress.phase = phase + 1;
    progress.phase_started = false;
    save_state(state_path, progress, identity, net, opt);
  }

  TrainReport report;
  report.epochs = progress.records;
  report.best_val_loss = progress.best_val;
  report.best_epoch = progress.best_epoch;
  report.checkpoint = best_path;
  report.phase1_stop_epoch = progress.phase1_stop;
  report.phase2_stop_epoch = progress.phase2_stop;
  report.steps = progress.steps;
  report.completed = !interrupted;
  if (interrupted) return report;

  if (progress.best_epoch == 0) save_checkpoint(net, best_path, metadata);
  report.final_train_metric = evaluate(net, train_set, data.task, spec.target_scale).metric;
  report.final_val_metric = evaluate(net, val_set, data.task, spec.target_scale).metric;
  write_report(dir, progress.records);
  write_text(dir / "summary.json", summary_json(report).dump(2) + "\n");
  return report;
}

}  // namespace ctxh
