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

#include "ctxh/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ctxh/error.hpp"
#include "ctxh/image_io.hpp"
#include "ctxh/rng.hpp"

namespace ctxh {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view task_name(Task t) noexcept { return t == Task::kSegment ? "segment" : "count"; }

Task parse_task(std::string_view name, const std::string& field) {
  if (name == "segment") return Task::kSegment;
  if (name == "count") return Task::kCount;
  throw ConfigError(field, "expected \"segment\" or \"count\", got \"" + std::string(name) + "\"");
}

std::string_view split_name(Split s) noexcept {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name, const std::string& field) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError(field, "expected train, val or test, got \"" + std::string(name) + "\"");
}

const std::vector<std::size_t>& SplitIndices::operator[](Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kVal: return val;
    case Split::kTest: break;
  }
  return test;
}

SplitIndices resolve_split(const SplitSpec& spec, std::size_t dataset_size) {
  const std::size_t need = spec.train + spec.val + spec.test;
  if (need > dataset_size) {
    throw ConfigError("split", "train+val+test = " + std::to_string(need) + " exceeds the " +
                                   std::to_string(dataset_size) + " available samples");
  }
  std::vector<std::size_t> order(dataset_size);
  for (std::size_t i = 0; i < dataset_size; ++i) order[i] = i;
  if (spec.mode == SplitSpec::Mode::kRandom) order = Rng(spec.seed).derive("split").permutation(dataset_size);
  SplitIndices out;
  auto take = [&, next = std::size_t{0}](std::vector<std::size_t>& dst, std::size_t count) mutable {
    dst.assign(order.begin() + static_cast<std::ptrdiff_t>(next),
               order.begin() + static_cast<std::ptrdiff_t>(next + count));
    next += count;
  };
  take(out.train, spec.train);
  take(out.val, spec.val);
  take(out.test, spec.test);
  return out;
}

std::vector<Sample> Dataset::subset(Split which) const {
  const SplitIndices idx = resolve_split(split, samples.size());
  std::vector<Sample> out;
  for (std::size_t i : idx[which]) out.push_back(samples[i]);
  return out;
}

namespace {

bool parse_double(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<Dot> read_dots_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open dot annotations");
  std::vector<Dot> dots;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view text = trim_cr(line);
    if (text.find_first_not_of(" \t") == std::string_view::npos) continue;
    const auto comma = text.find(',');
    Dot d;
    const bool ok = comma != std::string_view::npos && parse_double(text.substr(0, comma), d.x) &&
                    parse_double(text.substr(comma + 1), d.y);
    if (!ok) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected \"x,y\", got \"" +
                      std::string(text) + "\"");
    }
    first = false;
    dots.push_back(d);
  }
  return dots;
}

void write_dots_csv(const fs::path& path, const std::vector<Dot>& dots) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << "x,y\n";
  for (const Dot& d : dots) {
    char buf[64];
    auto r1 = std::to_chars(buf, buf + sizeof buf, d.x);
    *r1.ptr++ = ',';
    auto r2 = std::to_chars(r1.ptr, buf + sizeof buf, d.y);
    out.write(buf, r2.ptr - buf);
    out << '\n';
  }
}

namespace {

constexpr int kFormatVersion = 1;

std::string manifest_field(const std::string& name) { return "manifest." + name; }

template <typename V>
V get_field(const json& j, const char* key, const std::string& context) {
  if (!j.contains(key)) throw ConfigError(context + "." + key, "missing");
  try {
    return j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(context + "." + key, e.what());
  }
}

}  // namespace

Dataset load_dataset(const fs::path& dir, double sigma) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("data.dir", manifest_path.string() + " does not exist or is unreadable");
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("manifest", manifest_path.string() + ": " + e.what());
  }
  const std::string ctx = "manifest";
  if (get_field<int>(m, "format_version", ctx) != kFormatVersion) {
    throw ConfigError(manifest_field("format_version"), "unsupported dataset format version");
  }
  Dataset ds;
  ds.task = parse_task(get_field<std::string>(m, "task", ctx), manifest_field("task"));
  const json split = m.value("split", json::object());
  const std::string sctx = manifest_field("split");
  const std::string mode = split.value("mode", std::string("sequential"));
  if (mode == "sequential") {
    ds.split.mode = SplitSpec::Mode::kSequential;
  } else if (mode == "random") {
    ds.split.mode = SplitSpec::Mode::kRandom;
  } else {
    throw ConfigError(sctx + ".mode", "expected sequential or random");
  }
  ds.split.seed = split.value("seed", std::uint64_t{0});
  ds.split.train = split.value("train", std::size_t{0});
  ds.split.val = split.value("val", std::size_t{0});
  ds.split.test = split.value("test", std::size_t{0});

  const json samples = m.value("samples", json::array());
  if (!samples.is_array()) throw ConfigError(manifest_field("samples"), "must be an array");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const json& e = samples[i];
    const std::string ectx = manifest_field("samples[" + std::to_string(i) + "]");
    Sample s;
    s.id = get_field<std::string>(e, "id", ectx);
    s.image = load_image(dir / get_field<std::string>(e, "image", ectx));
    const Shape& is = s.image.shape();
    if (ds.task == Task::kSegment) {
      LabelMap labels = load_label_png(dir / get_field<std::string>(e, "labels", ectx));
      if (labels.shape().h != is.h || labels.shape().w != is.w) {
        throw DataError(s.id + ": label map " + to_string(labels.shape()) + " does not match image " + to_string(is));
      }
      s.labels = std::move(labels);
    } else {
      s.dots = read_dots_csv(dir / get_field<std::string>(e, "dots", ectx));
      s.density = density_from_dots<float>(s.dots, is.h, is.w, sigma);
    }
    ds.samples.push_back(std::move(s));
  }
  resolve_split(ds.split, ds.samples.size());
  return ds;
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  json samples = json::array();
  for (const Sample& s : dataset.samples) {
    json e;
    e["id"] = s.id;
    const Shape& is = s.image.shape();
    std::vector<std::uint16_t> px(is.c * is.spatial());
    for (std::size_t c = 0; c < is.c; ++c) {
      for (std::size_t p = 0; p < is.spatial(); ++p) {
        const float v = std::clamp(s.image[c * is.spatial() + p], 0.0f, 1.0f);
        px[p * is.c + c] = static_cast<std::uint16_t>(std::lround(v * 65535.0f));
      }
    }
    if (is.c == 1) {
      e["image"] = s.id + ".png";
      save_png_gray16(dir / e["image"].get<std::string>(), px, is.h, is.w);
    } else {
      e["image"] = s.id + ".tif";
      save_tiff(dir / e["image"].get<std::string>(), px, is.h, is.w, is.c, 16);
    }
    if (dataset.task == Task::kSegment) {
      if (!s.labels) throw ContractError("save_dataset: segmentation sample " + s.id + " has no labels");
      std::vector<std::uint8_t> lab(s.labels->size());
      for (std::size_t p = 0; p < lab.size(); ++p) {
        const std::int32_t v = (*s.labels)[p];
        if (v < 0 || v > 255) throw DataError(s.id + ": label value " + std::to_string(v) + " does not fit 8 bits");
        lab[p] = static_cast<std::uint8_t>(v);
      }
      e["labels"] = s.id + "_labels.png";
      save_png_gray8(dir / e["labels"].get<std::string>(), lab, is.h, is.w);
    } else {
      e["dots"] = s.id + "_dots.csv";
      write_dots_csv(dir / e["dots"].get<std::string>(), s.dots);
    }
    samples.push_back(std::move(e));
  }
  json m;
  m["format_version"] = kFormatVersion;
  m["task"] = std::string(task_name(dataset.task));
  m["split"] = {{"mode", dataset.split.mode == SplitSpec::Mode::kRandom ? "random" : "sequential"},
                {"seed", dataset.split.seed},
                {"train", dataset.split.train},
                {"val", dataset.split.val},
                {"test", dataset.split.test}};
  m["samples"] = std::move(samples);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError((dir / "manifest.json").string() + ": cannot open for writing");
  out << m.dump(2) << '\n';
}

}  // namespace ctxh
