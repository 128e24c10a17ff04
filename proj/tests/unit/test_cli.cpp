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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "app.hpp"
#include "ctxh/gradcheck.hpp"
#include "ctxh/image_io.hpp"
#include "oracles.hpp"

using ctxh::testing::temp_dir;
using nlohmann::json;
namespace fs = std::filesystem;
namespace app = ctxh::app;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "ctxh");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = app::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path write_config(const fs::path& dir, const json& j) {
  std::ofstream(dir / "run.json") << j.dump(2);
  return dir / "run.json";
}

json small_config(const std::string& task) {
  return {{"task", task},
          {"seed", 4},
          {"output_dir", "out"},
          {"data", {{"dir", "data"}}},
          {"network", {{"depth", 2}, {"base_filters", 2}}},
          {"train", {{"batch_size", 2}, {"phase1", {{"max_epochs", 1}}}, {"phase2", {{"max_epochs", 1}}}}}};
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, app::kUsageError);
  EXPECT_EQ(run({"frobnicate"}).code, app::kUsageError);
  EXPECT_EQ(run({"gradcheck", "--scope", "everything", "--seed", "1"}).code, app::kUsageError);
  EXPECT_EQ(run({"--help"}).code, app::kOk);
}

TEST(Cli, MissingConfigFile) {
  const auto r = run({"train", "--config", "/nonexistent/run.json"});
  EXPECT_EQ(r.code, app::kUsageError);
  EXPECT_NE(r.err.find("config"), std::string::npos) << r.err;
}

TEST(Cli, ConfigMissingSeedNamesField) {
  const fs::path dir = temp_dir("cli_noseed");
  ASSERT_EQ(run({"synth", "--task", "segment", "--n", "2", "--out", (dir / "data").string(), "--seed", "1"}).code, 0);
  json j = small_config("segment");
  j.erase("seed");
  const auto r = run({"train", "--config", write_config(dir, j).string()});
  EXPECT_EQ(r.code, app::kUsageError);
  EXPECT_NE(r.err.find("seed"), std::string::npos) << r.err;
}

TEST(Cli, GradcheckOpsListsEveryOpOnce) {
  const auto r = run({"gradcheck", "--scope", "ops", "--seed", "3"});
  EXPECT_EQ(r.code, app::kOk) << r.err;
  for (const auto& name : ctxh::gradcheck_op_names()) {
    std::size_t hits = 0;
    std::istringstream lines(r.out);
    for (std::string line; std::getline(lines, line);) hits += line.rfind(name + " ", 0) == 0;
    EXPECT_EQ(hits, 1u) << name;
  }
}

TEST(Cli, GradcheckInjectedFaultFails) {
  const auto r = run({"gradcheck", "--scope", "ops", "--seed", "3", "--inject-fault", "contextual_conv"});
  EXPECT_EQ(r.code, app::kVerificationFailed);
  EXPECT_NE(r.err.find("contextual_conv"), std::string::npos) << r.err;
  EXPECT_EQ(run({"gradcheck", "--scope", "ops", "--seed", "3", "--inject-fault", "nope"}).code, app::kUsageError);
}

TEST(Cli, SynthEmptyDataset) {
  const fs::path dir = temp_dir("cli_synth0");
  EXPECT_EQ(run({"synth", "--task", "count", "--n", "0", "--out", (dir / "d").string(), "--seed", "1"}).code, 0);
  const json manifest = json::parse(read_file(dir / "d" / "manifest.json"));
  EXPECT_TRUE(manifest["samples"].empty());
}

class CliTrained : public ::testing::Test {
 protected:
  static void train_task(const std::string& task, const fs::path& dir) {
    ASSERT_EQ(run({"synth", "--task", task, "--n", "4", "--out", (dir / "data").string(), "--seed", "2"}).code, 0);
    const auto r = run({"train", "--config", write_config(dir, small_config(task)).string()});
    ASSERT_EQ(r.code, app::kOk) << r.err;
  }
};

TEST_F(CliTrained, TrainWritesOutputsAndIsDeterministic) {
  const fs::path a = temp_dir("cli_train_a"), b = temp_dir("cli_train_b");
  train_task("segment", a);
  train_task("segment", b);
  for (const char* f : {"best.ckpt", "report.jsonl", "summary.json", "config.json"}) {
    ASSERT_TRUE(fs::exists(a / "out" / f)) << f;
    if (std::string(f) != "config.json") {
      EXPECT_EQ(read_file(a / "out" / f), read_file(b / "out" / f)) << f;
    }
  }
}

TEST_F(CliTrained, EvalReproducesReportedTrainMetric) {
  const fs::path dir = temp_dir("cli_eval");
  train_task("segment", dir);
  const json summary = json::parse(read_file(dir / "out" / "summary.json"));
  const auto r = run({"eval", "--checkpoint", (dir / "out" / "best.ckpt").string(), "--data",
                      (dir / "data").string(), "--split", "train"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string key;
  double acc = -1.0;
  lines >> key >> acc;
  EXPECT_EQ(key, "pixel_accuracy");
  EXPECT_NEAR(acc, summary["final_train_metric"].get<double>(), 1e-6);
  const auto empty = run({"eval", "--checkpoint", (dir / "out" / "best.ckpt").string(), "--data",
                          (dir / "data").string(), "--split", "test"});
  EXPECT_EQ(empty.code, app::kUsageError);
}

TEST_F(CliTrained, InferSegmentationOutputs) {
  const fs::path dir = temp_dir("cli_infer_seg");
  train_task("segment", dir);
  const auto r = run({"infer", "--checkpoint", (dir / "out" / "best.ckpt").string(), "--input",
                      (dir / "data" / "seg_000[0-2].png").string(), "--out", (dir / "pred").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* stem : {"seg_0000", "seg_0001", "seg_0002"}) {
    const auto labels = ctxh::load_label_png(dir / "pred" / (std::string(stem) + ".png"));
    for (auto v : labels.data()) ASSERT_TRUE(v == 0 || v == 1);
  }
  const auto again = run({"infer", "--checkpoint", (dir / "out" / "best.ckpt").string(), "--input",
                          (dir / "data" / "seg_0000.png").string(), "--out", (dir / "pred2").string()});
  EXPECT_EQ(read_file(dir / "pred" / "seg_0000.png"), read_file(dir / "pred2" / "seg_0000.png"));
}

TEST_F(CliTrained, InferCountingSelfConsistent) {
  const fs::path dir = temp_dir("cli_infer_count");
  train_task("count", dir);
  const auto r = run({"infer", "--checkpoint", (dir / "out" / "best.ckpt").string(), "--input",
                      (dir / "data" / "count_000*.png").string(), "--out", (dir / "pred").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::size_t outputs = 0;
  for (std::string stem; lines >> stem;) {
    double printed = 0.0;
    lines >> printed;
    ++outputs;
    std::istringstream side(read_file(dir / "pred" / (stem + ".txt")));
    std::string k;
    double offset = 0, scale = 0, count = 0;
    side >> k >> offset >> k >> scale >> k >> count;
    EXPECT_DOUBLE_EQ(count, printed);
    // Re-integrate the emitted 16-bit density.
    const auto png = ctxh::load_image(dir / "pred" / (stem + ".png"));
    double total = 0.0;
    for (float v : png.data()) total += offset + std::round(double(v) * 65535.0) * scale;
    EXPECT_NEAR(total, count, 1e-2) << stem;
  }
  EXPECT_EQ(outputs, 4u);
}

TEST_F(CliTrained, InferIndivisibleInputSuggestsPad) {
  const fs::path dir = temp_dir("cli_infer_pad");
  train_task("segment", dir);
  const std::vector<std::uint8_t> px(10 * 8, 128);
  ctxh::save_png_gray8(dir / "odd.png", px, 10, 8);
  const auto r = run({"infer", "--checkpoint", (dir / "out" / "best.ckpt").string(), "--input",
                      (dir / "odd.png").string(), "--out", (dir / "pred").string()});
  EXPECT_EQ(r.code, app::kUsageError);
  EXPECT_NE(r.err.find("pad to 12x8"), std::string::npos) << r.err;
}

TEST_F(CliTrained, HugeLearningRateIsNumericalError) {
  const fs::path dir = temp_dir("cli_nan");
  ASSERT_EQ(run({"synth", "--task", "count", "--n", "4", "--out", (dir / "data").string(), "--seed", "2"}).code, 0);
  json j = small_config("count");
  j["optimizer"] = {{"learning_rate", 1e30}};
  j["train"]["phase1"]["max_epochs"] = 3;
  const auto r = run({"train", "--config", write_config(dir, j).string()});
  EXPECT_EQ(r.code, app::kNumericalError) << r.out << r.err;
}

TEST_F(CliTrained, ResumeMatchesUninterruptedRun) {
  const fs::path a = temp_dir("cli_resume_a"), b = temp_dir("cli_resume_b");
  train_task("segment", a);
  ASSERT_EQ(run({"synth", "--task", "segment", "--n", "4", "--out", (b / "data").string(), "--seed", "2"}).code, 0);
  const std::string cfg = write_config(b, small_config("segment")).string();
  ASSERT_EQ(run({"train", "--config", cfg, "--stop-after", "1"}).code, 0);
  ASSERT_EQ(run({"train", "--config", cfg, "--resume"}).code, 0);
  for (const char* f : {"best.ckpt", "report.jsonl", "summary.json", "last.state"}) {
    EXPECT_EQ(read_file(a / "out" / f), read_file(b / "out" / f)) << f;
  }
}
