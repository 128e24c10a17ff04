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

#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ctxh/error.hpp"

namespace ctxh {

/// (batch, channels, height, width). Every component is at least 1.
struct Shape {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  /// n*c*h*w; throws ShapeError if a component is zero or the product overflows.
  std::size_t numel() const;
  std::size_t spatial() const noexcept { return h * w; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);
std::ostream& operator<<(std::ostream& os, const Shape& s);

/// Dense rank-4 array stored row-major in (n, c, h, w) order, w fastest.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(const Shape& shape, T fill = T(0));
  Tensor(const Shape& shape, std::vector<T> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[offset(n, c, h, w)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[offset(n, c, h, w)];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Contiguous (h*w) plane of sample n, channel c.
  std::span<T> plane(std::size_t n, std::size_t c) noexcept {
    return {data_.data() + offset(n, c, 0, 0), shape_.spatial()};
  }
  std::span<const T> plane(std::size_t n, std::size_t c) const noexcept {
    return {data_.data() + offset(n, c, 0, 0), shape_.spatial()};
  }

  void fill(T v);
  Tensor& operator+=(const Tensor& other);

  /// Element-type conversion (float <-> double).
  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

template <typename T>
Tensor<T> zeros(const Shape& shape);
template <typename T>
Tensor<T> ones(const Shape& shape);
template <typename T>
Tensor<T> full(const Shape& shape, T value);

/// Throws ShapeError unless a and b have identical shapes.
void require_same_shape(const Shape& a, const Shape& b, const char* op);

// Elementwise family. All require identical shapes and iterate in index order,
// so results never depend on threading.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
T sum(const Tensor<T>& a);
template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> map_elementwise(const Tensor<T>& a, const std::function<T(T)>& f);

/// Samples [begin, end) along the batch axis.
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& a, std::size_t begin, std::size_t end);
/// Channels [begin, end).
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& a, std::size_t begin, std::size_t end);
/// Stacks single-sample tensors of equal (c, h, w) along the batch axis.
template <typename T>
Tensor<T> stack_batch(std::span<const Tensor<T>> items);

}  // namespace ctxh
