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

#include "ctxh/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "ctxh/error.hpp"

namespace ctxh {

namespace fs = std::filesystem;

static_assert(std::numeric_limits<float>::is_iec559, "archives store IEEE-754 binary32");

const Tensor<float>& Archive::at(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw FormatError(0, "archive has no tensor named " + name);
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Cursor {
 public:
  explicit Cursor(const std::string& data) : data_(data) {}

  std::size_t offset() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == data_.size(); }

  const char* take(std::size_t n, const char* what) {
    if (n > data_.size() - pos_) {
      throw FormatError(pos_, std::string("truncated archive while reading ") + what);
    }
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32(const char* what) {
    const auto* p = reinterpret_cast<const unsigned char*>(take(4, what));
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(*take(1, what)); }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_archive(const fs::path& path, const Archive& archive) {
  std::string out = "CTXH";
  put_u32(out, kArchiveVersion);
  const std::string header = archive.header.dump();
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  for (const auto& [name, value] : archive.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    out.push_back(4);
    const Shape& s = value.shape();
    for (std::size_t d : {s.n, s.c, s.h, s.w}) {
      if (d > std::numeric_limits<std::uint32_t>::max()) throw ContractError("archive: dimension too large");
      put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (float f : value.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }

  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError(tmp.string() + ": cannot open for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    f.flush();
    if (!f) throw InputError(tmp.string() + ": write failed");
  }
  fs::rename(tmp, path);
}

Archive read_archive(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError(path.string() + ": cannot open archive");
  const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Cursor cur(data);
  if (std::memcmp(cur.take(4, "magic"), "CTXH", 4) != 0) throw FormatError(0, "bad magic (not a CTXH archive)");
  const std::size_t version_at = cur.offset();
  const std::uint32_t version = cur.u32("version");
  if (version != kArchiveVersion) {
    throw FormatError(version_at, "unsupported archive version " + std::to_string(version) + " (this build reads " +
                                      std::to_string(kArchiveVersion) + ")");
  }
  const std::uint32_t header_len = cur.u32("header length");
  const std::size_t header_at = cur.offset();
  const char* header = cur.take(header_len, "header");
  Archive out;
  try {
    out.header = nlohmann::json::parse(header, header + header_len);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(header_at, std::string("malformed header: ") + e.what());
  }
  while (!cur.done()) {
    NamedTensor t;
    const std::uint32_t name_len = cur.u32("tensor name length");
    const char* name = cur.take(name_len, "tensor name");
    t.name.assign(name, name_len);
    const std::size_t rank_at = cur.offset();
    const std::uint8_t rank = cur.u8("rank");
    if (rank < 1 || rank > 4) throw FormatError(rank_at, "tensor " + t.name + " has unsupported rank " + std::to_string(rank));
    std::size_t dims[4] = {1, 1, 1, 1};
    for (std::uint8_t i = 0; i < rank; ++i) {
      const std::size_t at = cur.offset();
      dims[4 - rank + i] = cur.u32("dims");
      if (dims[4 - rank + i] == 0) throw FormatError(at, "tensor " + t.name + " has a zero dimension");
    }
    const Shape shape{dims[0], dims[1], dims[2], dims[3]};
    const std::size_t data_at = cur.offset();
    const std::size_t count = shape.numel();
    if (count > (data.size() - data_at) / 4) throw FormatError(data_at, "truncated archive while reading data of " + t.name);
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(cur.u32("data"));
    t.value = Tensor<float>(shape, std::move(values));
    out.tensors.push_back(std::move(t));
  }
  return out;
}

}  // namespace ctxh
