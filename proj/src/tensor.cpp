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

#include "ctxh/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>

namespace ctxh {

std::size_t Shape::numel() const {
  const std::size_t dims[] = {n, c, h, w};
  std::size_t total = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw ShapeError("shape " + to_string(*this) + " has a zero component");
    if (total > std::numeric_limits<std::size_t>::max() / d) {
      throw ShapeError("shape " + to_string(*this) + " overflows the index range");
    }
    total *= d;
  }
  // std::vector cannot hold more than this many elements of any type we use.
  if (total > std::numeric_limits<std::ptrdiff_t>::max() / sizeof(double)) {
    throw ShapeError("shape " + to_string(*this) + " is too large to allocate");
  }
  return total;
}

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

std::ostream& operator<<(std::ostream& os, const Shape& s) { return os << to_string(s); }

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

template <typename T>
Tensor<T>::Tensor(const Shape& shape, T fill) : shape_(shape), data_(shape.numel(), fill) {}

template <typename T>
Tensor<T>::Tensor(const Shape& shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape.numel()) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape));
  }
}

template <typename T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
Tensor<T>& Tensor<T>::operator+=(const Tensor& other) {
  require_same_shape(shape_, other.shape_, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

template <typename T>
Tensor<T> zeros(const Shape& shape) {
  return Tensor<T>(shape, T(0));
}

template <typename T>
Tensor<T> ones(const Shape& shape) {
  return Tensor<T>(shape, T(1));
}

template <typename T>
Tensor<T> full(const Shape& shape, T value) {
  return Tensor<T>(shape, value);
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
  return out;
}

template <typename T>
T sum(const Tensor<T>& a) {
  T acc = 0;
  for (T v : a.data()) acc += v;
  return acc;
}

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "dot");
  T acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T d = std::abs(a[i] - b[i]);
    if (!(d <= m)) m = d;  // propagates NaN
  }
  return m;
}

template <typename T>
Tensor<T> map_elementwise(const Tensor<T>& a, const std::function<T(T)>& f) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <typename T>
Tensor<T> slice_batch(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  if (begin >= end || end > s.n) throw ShapeError("slice_batch: bad range");
  Shape os = s;
  os.n = end - begin;
  const std::size_t per = s.c * s.h * s.w;
  std::vector<T> data(a.data().begin() + begin * per, a.data().begin() + end * per);
  return Tensor<T>(os, std::move(data));
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  if (begin >= end || end > s.c) throw ShapeError("slice_channels: bad range");
  Tensor<T> out({s.n, end - begin, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = begin; c < end; ++c) {
      auto src = a.plane(n, c);
      std::copy(src.begin(), src.end(), out.plane(n, c - begin).begin());
    }
  }
  return out;
}

template <typename T>
Tensor<T> stack_batch(std::span<const Tensor<T>> items) {
  if (items.empty()) throw ShapeError("stack_batch: no tensors");
  Shape s = items.front().shape();
  std::size_t total = 0;
  for (const auto& t : items) {
    Shape ts = t.shape();
    if (ts.c != s.c || ts.h != s.h || ts.w != s.w) {
      throw ShapeError("stack_batch: mismatched " + to_string(ts) + " vs " + to_string(s));
    }
    total += ts.n;
  }
  s.n = total;
  std::vector<T> data;
  data.reserve(s.numel());
  for (const auto& t : items) data.insert(data.end(), t.data().begin(), t.data().end());
  return Tensor<T>(s, std::move(data));
}

#define CTXH_INSTANTIATE(T)                                                             \
  template class Tensor<T>;                                                             \
  template Tensor<T> zeros<T>(const Shape&);                                            \
  template Tensor<T> ones<T>(const Shape&);                                             \
  template Tensor<T> full<T>(const Shape&, T);                                          \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                     \
  template T sum<T>(const Tensor<T>&);                                                  \
  template T dot<T>(const Tensor<T>&, const Tensor<T>&);                                \
  template T max_abs_diff<T>(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> map_elementwise<T>(const Tensor<T>&, const std::function<T(T)>&);  \
  template Tensor<T> slice_batch<T>(const Tensor<T>&, std::size_t, std::size_t);        \
  template Tensor<T> slice_channels<T>(const Tensor<T>&, std::size_t, std::size_t);     \
  template Tensor<T> stack_batch<T>(std::span<const Tensor<T>>);

CTXH_INSTANTIATE(float)
CTXH_INSTANTIATE(double)

#undef CTXH_INSTANTIATE

template class Tensor<std::int32_t>;
template Tensor<std::int32_t> stack_batch<std::int32_t>(std::span<const Tensor<std::int32_t>>);

}  // namespace ctxh
