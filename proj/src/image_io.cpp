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

#include "ctxh/image_io.hpp"

#include "ctxh/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

namespace ctxh {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const fs::path& path, const std::string& what) {
  throw InputError(path.string() + ": " + what);
}

// ---------------------------------------------------------------------------
// PNG (libpng). All state lives behind one pointer that is never reassigned
// after setjmp, so nothing is left indeterminate by a longjmp.

struct PngState {
  std::FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  bool writing = false;
  std::vector<std::uint8_t> bytes;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int channels = 0;
  std::string message;

  ~PngState() {
    if (png != nullptr) {
      if (writing) {
        png_destroy_write_struct(&png, info != nullptr ? &info : nullptr);
      } else {
        png_destroy_read_struct(&png, info != nullptr ? &info : nullptr, nullptr);
      }
    }
    if (fp != nullptr) std::fclose(fp);
  }
};

void png_error_handler(png_structp png, png_const_charp msg) {
  auto* st = static_cast<PngState*>(png_get_error_ptr(png));
  st->message = msg != nullptr ? msg : "libpng error";
  std::longjmp(png_jmpbuf(png), 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

bool read_png(PngState* st) {
  png_byte sig[8];
  if (std::fread(sig, 1, 8, st->fp) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    st->message = "not a PNG file";
    return false;
  }
  st->png = png_create_read_struct(PNG_LIBPNG_VER_STRING, st, png_error_handler, png_warning_handler);
  if (st->png == nullptr) return false;
  st->info = png_create_info_struct(st->png);
  if (st->info == nullptr) return false;
  if (setjmp(png_jmpbuf(st->png))) return false;

  png_init_io(st->png, st->fp);
  png_set_sig_bytes(st->png, 8);
  png_read_info(st->png, st->info);
  const int color = png_get_color_type(st->png, st->info);
  const int depth = png_get_bit_depth(st->png, st->info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(st->png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(st->png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(st->png);
  png_read_update_info(st->png, st->info);

  st->width = png_get_image_width(st->png, st->info);
  st->height = png_get_image_height(st->png, st->info);
  st->bit_depth = png_get_bit_depth(st->png, st->info);
  st->channels = png_get_channels(st->png, st->info);
  const std::size_t stride = png_get_rowbytes(st->png, st->info);
  st->bytes.resize(stride * st->height);
  st->rows.resize(st->height);
  for (png_uint_32 r = 0; r < st->height; ++r) st->rows[r] = st->bytes.data() + r * stride;
  png_read_image(st->png, st->rows.data());
  png_read_end(st->png, nullptr);
  return true;
}

struct RawImage {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t channels = 0;
  int bits = 0;
  std::vector<std::uint16_t> samples;  // interleaved
};

RawImage decode_png(const fs::path& path) {
  auto st = std::make_unique<PngState>();
  st->fp = std::fopen(path.c_str(), "rb");
  if (st->fp == nullptr) fail(path, "cannot open file");
  if (!read_png(st.get())) fail(path, "corrupt PNG (" + st->message + ")");
  if (st->bit_depth != 8 && st->bit_depth != 16) fail(path, "unsupported PNG bit depth " + std::to_string(st->bit_depth));
  if (st->channels != 1 && st->channels != 3) fail(path, "unsupported PNG channel count " + std::to_string(st->channels));
  RawImage img{st->height, st->width, static_cast<std::size_t>(st->channels), st->bit_depth, {}};
  const std::size_t count = img.h * img.w * img.channels;
  img.samples.resize(count);
  if (img.bits == 8) {
    for (std::size_t i = 0; i < count; ++i) img.samples[i] = st->bytes[i];
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      img.samples[i] = static_cast<std::uint16_t>((st->bytes[2 * i] << 8) | st->bytes[2 * i + 1]);
    }
  }
  return img;
}

bool write_png(PngState* st, int bit_depth) {
  st->png = png_create_write_struct(PNG_LIBPNG_VER_STRING, st, png_error_handler, png_warning_handler);
  if (st->png == nullptr) return false;
  st->info = png_create_info_struct(st->png);
  if (st->info == nullptr) return false;
  if (setjmp(png_jmpbuf(st->png))) return false;
  png_init_io(st->png, st->fp);
  png_set_IHDR(st->png, st->info, st->width, st->height, bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(st->png, st->info);
  png_write_image(st->png, st->rows.data());
  png_write_end(st->png, nullptr);
  return true;
}

void encode_png(const fs::path& path, std::vector<std::uint8_t> bytes, std::size_t h, std::size_t w, int bit_depth) {
  auto st = std::make_unique<PngState>();
  st->writing = true;
  st->width = static_cast<png_uint_32>(w);
  st->height = static_cast<png_uint_32>(h);
  st->bytes = std::move(bytes);
  const std::size_t stride = w * static_cast<std::size_t>(bit_depth / 8);
  st->rows.resize(h);
  for (std::size_t r = 0; r < h; ++r) st->rows[r] = st->bytes.data() + r * stride;
  st->fp = std::fopen(path.c_str(), "wb");
  if (st->fp == nullptr) fail(path, "cannot open file for writing");
  if (!write_png(st.get(), bit_depth)) fail(path, "PNG write failed (" + st->message + ")");
}

// ---------------------------------------------------------------------------
// Baseline TIFF: uncompressed, chunky, strips, 8/16-bit gray or RGB.

class TiffReader {
 public:
  TiffReader(const fs::path& path, std::vector<std::uint8_t> data) : path_(path), data_(std::move(data)) {
    if (data_.size() < 8) fail(path_, "truncated TIFF header");
    if (data_[0] == 'I' && data_[1] == 'I') {
      little_ = true;
    } else if (data_[0] == 'M' && data_[1] == 'M') {
      little_ = false;
    } else {
      fail(path_, "not a TIFF file");
    }
    if (u16(2) != 42) fail(path_, "not a TIFF file (bad magic)");
  }

  RawImage decode() {
    const std::uint32_t ifd = u32(4);
    const std::uint16_t entries = u16(ifd);
    std::uint32_t width = 0, height = 0, compression = 1, photometric = 1, samples = 1, planar = 1;
    std::uint32_t rows_per_strip = 0xFFFFFFFFu;
    std::vector<std::uint32_t> bits, offsets, counts;
    for (std::uint16_t e = 0; e < entries; ++e) {
      const std::size_t at = ifd + 2 + 12 * static_cast<std::size_t>(e);
      const std::uint16_t tag = u16(at);
      const auto values = read_values(at);
      if (values.empty()) continue;
      switch (tag) {
        case 256: width = values[0]; break;
        case 257: height = values[0]; break;
        case 258: bits = values; break;
        case 259: compression = values[0]; break;
        case 262: photometric = values[0]; break;
        case 273: offsets = values; break;
        case 277: samples = values[0]; break;
        case 278: rows_per_strip = values[0]; break;
        case 279: counts = values; break;
        case 284: planar = values[0]; break;
        default: break;
      }
    }
    if (width == 0 || height == 0) fail(path_, "TIFF without image dimensions");
    if (compression != 1) fail(path_, "compressed TIFF is not supported");
    if (planar != 1) fail(path_, "planar TIFF is not supported");
    if (bits.empty()) bits.push_back(1);
    const std::uint32_t depth = bits[0];
    if (depth != 8 && depth != 16) fail(path_, "unsupported TIFF bit depth " + std::to_string(depth));
    if (samples < 1 || samples > 4) fail(path_, "unsupported TIFF sample count " + std::to_string(samples));
    if (offsets.empty() || offsets.size() != counts.size()) fail(path_, "TIFF strip table missing or inconsistent");
    (void)rows_per_strip;

    const std::size_t keep = samples >= 3 ? 3 : 1;
    const std::size_t bytes_per = depth / 8;
    const std::size_t pixels = static_cast<std::size_t>(width) * height;
    std::vector<std::uint8_t> raw;
    raw.reserve(pixels * samples * bytes_per);
    for (std::size_t s = 0; s < offsets.size(); ++s) {
      if (static_cast<std::size_t>(offsets[s]) + counts[s] > data_.size()) fail(path_, "truncated TIFF strip");
      raw.insert(raw.end(), data_.begin() + offsets[s], data_.begin() + offsets[s] + counts[s]);
    }
    if (raw.size() < pixels * samples * bytes_per) fail(path_, "TIFF strips shorter than the image");

    RawImage img{height, width, keep, static_cast<int>(depth), std::vector<std::uint16_t>(pixels * keep)};
    const std::uint32_t maxv = depth == 8 ? 255u : 65535u;
    for (std::size_t p = 0; p < pixels; ++p) {
      for (std::size_t c = 0; c < keep; ++c) {
        const std::size_t at = (p * samples + c) * bytes_per;
        std::uint32_t v = depth == 8 ? raw[at]
                                     : (little_ ? (raw[at] | (raw[at + 1] << 8)) : ((raw[at] << 8) | raw[at + 1]));
        if (photometric == 0) v = maxv - v;  // WhiteIsZero
        img.samples[p * keep + c] = static_cast<std::uint16_t>(v);
      }
    }
    return img;
  }

 private:
  void need(std::size_t at, std::size_t n) const {
    if (at + n > data_.size()) fail(path_, "truncated TIFF directory");
  }
  std::uint16_t u16(std::size_t at) const {
    need(at, 2);
    return little_ ? static_cast<std::uint16_t>(data_[at] | (data_[at + 1] << 8))
                   : static_cast<std::uint16_t>((data_[at] << 8) | data_[at + 1]);
  }
  std::uint32_t u32(std::size_t at) const {
    need(at, 4);
    const std::uint32_t b0 = data_[at], b1 = data_[at + 1], b2 = data_[at + 2], b3 = data_[at + 3];
    return little_ ? (b0 | (b1 << 8) | (b2 << 16) | (b3 << 24)) : ((b0 << 24) | (b1 << 16) | (b2 << 8) | b3);
  }
  std::vector<std::uint32_t> read_values(std::size_t entry) const {
    const std::uint16_t type = u16(entry + 2);
    const std::uint32_t count = u32(entry + 4);
    std::size_t size = 0;
    if (type == 3) {
      size = 2;  // SHORT
    } else if (type == 4) {
      size = 4;  // LONG
    } else {
      return {};
    }
    if (count > data_.size()) fail(path_, "corrupt TIFF entry count");
    const std::size_t start = size * count <= 4 ? entry + 8 : u32(entry + 8);
    std::vector<std::uint32_t> out(count);
    for (std::uint32_t i = 0; i < count; ++i) out[i] = size == 2 ? u16(start + 2 * i) : u32(start + 4 * i);
    return out;
  }

  fs::path path_;
  std::vector<std::uint8_t> data_;
  bool little_ = true;
};

RawImage decode_tiff(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open file");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return TiffReader(path, std::move(data)).decode();
}

RawImage decode_any(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open file");
  char head[4] = {};
  in.read(head, 4);
  if (in.gcount() < 4) fail(path, "file too short to be an image");
  if (static_cast<unsigned char>(head[0]) == 0x89 && head[1] == 'P' && head[2] == 'N' && head[3] == 'G') {
    return decode_png(path);
  }
  if ((head[0] == 'I' && head[1] == 'I') || (head[0] == 'M' && head[1] == 'M')) return decode_tiff(path);
  fail(path, "unrecognized image format (expected PNG or TIFF)");
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

}  // namespace

Tensor<float> load_image(const fs::path& path) {
  const RawImage img = decode_any(path);
  const float scale = img.bits == 8 ? 1.0f / 255.0f : 1.0f / 65535.0f;
  Tensor<float> out({1, img.channels, img.h, img.w});
  for (std::size_t p = 0; p < img.h * img.w; ++p) {
    for (std::size_t c = 0; c < img.channels; ++c) {
      out[c * img.h * img.w + p] = static_cast<float>(img.samples[p * img.channels + c]) * scale;
    }
  }
  return out;
}

Tensor<std::int32_t> load_label_png(const fs::path& path) {
  const RawImage img = decode_any(path);
  if (img.channels != 1) fail(path, "label map must have a single channel");
  Tensor<std::int32_t> out({1, 1, img.h, img.w});
  for (std::size_t p = 0; p < img.h * img.w; ++p) out[p] = img.samples[p];
  return out;
}

void save_png_gray8(const fs::path& path, std::span<const std::uint8_t> pixels, std::size_t h, std::size_t w) {
  if (pixels.size() != h * w) throw ShapeError("save_png_gray8: pixel count does not match h*w");
  encode_png(path, std::vector<std::uint8_t>(pixels.begin(), pixels.end()), h, w, 8);
}

void save_png_gray16(const fs::path& path, std::span<const std::uint16_t> pixels, std::size_t h, std::size_t w) {
  if (pixels.size() != h * w) throw ShapeError("save_png_gray16: pixel count does not match h*w");
  std::vector<std::uint8_t> bytes(2 * pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(pixels[i] >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(pixels[i] & 0xFF);
  }
  encode_png(path, std::move(bytes), h, w, 16);
}

void save_tiff(const fs::path& path, std::span<const std::uint16_t> samples, std::size_t h, std::size_t w,
               std::size_t channels, int bits) {
  if (channels != 1 && channels != 3) throw ContractError("save_tiff: channels must be 1 or 3");
  if (bits != 8 && bits != 16) throw ContractError("save_tiff: bits must be 8 or 16");
  if (samples.size() != h * w * channels) throw ShapeError("save_tiff: sample count does not match image size");

  std::vector<std::uint8_t> out = {'I', 'I', 42, 0};
  const std::uint32_t data_offset = 8;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * static_cast<std::size_t>(bits / 8));
  std::uint32_t extra = data_offset + data_bytes;  // BitsPerSample array for RGB
  const std::uint32_t ifd = extra + (channels == 3 ? 6 : 0);
  put_u32(out, ifd);
  for (std::uint16_t v : samples) {
    if (bits == 8) {
      out.push_back(static_cast<std::uint8_t>(v));
    } else {
      put_u16(out, v);
    }
  }
  if (channels == 3) {
    for (int i = 0; i < 3; ++i) put_u16(out, static_cast<std::uint16_t>(bits));
  }
  struct Entry {
    std::uint16_t tag, type;
    std::uint32_t count, value;
  };
  const bool rgb = channels == 3;
  const std::vector<Entry> entries = {
      {256, 4, 1, static_cast<std::uint32_t>(w)},
      {257, 4, 1, static_cast<std::uint32_t>(h)},
      {258, 3, rgb ? 3u : 1u, rgb ? extra : static_cast<std::uint32_t>(bits)},
      {259, 3, 1, 1},
      {262, 3, 1, rgb ? 2u : 1u},
      {273, 4, 1, data_offset},
      {277, 3, 1, static_cast<std::uint32_t>(channels)},
      {278, 4, 1, static_cast<std::uint32_t>(h)},
      {279, 4, 1, data_bytes},
      {284, 3, 1, 1},
  };
  put_u16(out, static_cast<std::uint16_t>(entries.size()));
  for (const Entry& e : entries) {
    put_u16(out, e.tag);
    put_u16(out, e.type);
    put_u32(out, e.count);
    if (e.type == 3 && e.count == 1) {
      put_u16(out, static_cast<std::uint16_t>(e.value));
      put_u16(out, 0);
    } else {
      put_u32(out, e.value);
    }
  }
  put_u32(out, 0);

  std::ofstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open file for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) fail(path, "TIFF write failed");
}

void save_image_gray8(const fs::path& path, const Tensor<float>& image) {
  const Shape& s = image.shape();
  if (s.n != 1 || s.c != 1) throw ShapeError("save_image_gray8: expected a (1,1,h,w) tensor, got " + to_string(s));
  std::vector<std::uint8_t> px(s.spatial());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const float v = std::clamp(image[i], 0.0f, 1.0f);
    px[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  save_png_gray8(path, px, s.h, s.w);
}

}  // namespace ctxh
