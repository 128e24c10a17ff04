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

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctxh/error.hpp"
#include "ctxh/init.hpp"
#include "ctxh/rng.hpp"
#include "ctxh/tensor.hpp"

using namespace ctxh;

namespace {

// Sample variance computed in two passes, independent of the library's sum().
double sample_variance(const Tensor<double>& t) {
  double mean = 0.0;
  for (double v : t.data()) mean += v;
  mean /= static_cast<double>(t.size());
  double var = 0.0;
  for (double v : t.data()) var += (v - mean) * (v - mean);
  return var / static_cast<double>(t.size() - 1);
}

double max_abs(const Tensor<double>& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST(Tensor, ZerosIsAllZero) {
  const auto z = zeros<double>({1, 1, 2, 2});
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(sum(zeros<double>({2, 3, 5, 7})), 0.0);
  EXPECT_EQ(zeros<float>({1, 3, 4, 4}).shape(), (Shape{1, 3, 4, 4}));
}

TEST(Tensor, DataLengthMatchesShape) {
  const auto t = ones<float>({2, 3, 4, 5});
  EXPECT_EQ(t.size(), 120u);
  EXPECT_EQ(sum(t), 120.0f);
}

TEST(Tensor, ZeroComponentRejected) { EXPECT_THROW(zeros<double>({1, 0, 2, 2}), ShapeError); }

TEST(Tensor, OverflowRejected) {
  const std::size_t big = std::numeric_limits<std::size_t>::max() / 2;
  EXPECT_THROW(zeros<double>({big, 4, 1, 1}), ShapeError);
}

TEST(Tensor, RowMajorWidthFastest) {
  Tensor<double> t({1, 2, 2, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  EXPECT_EQ(t(0, 0, 0, 1), 1.0);
  EXPECT_EQ(t(0, 0, 1, 0), 3.0);
  EXPECT_EQ(t(0, 1, 0, 0), 6.0);
}

TEST(Tensor, ElementwiseFamily) {
  Tensor<double> x({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(add(x, zeros<double>(x.shape())), x);
  EXPECT_EQ(mul(x, ones<double>(x.shape())), x);
  EXPECT_EQ(sum(scale(x, 2.0)), 20.0);
  EXPECT_EQ(sum(sub(x, x)), 0.0);
  EXPECT_EQ(dot(x, x), 30.0);
  const auto sq = map_elementwise<double>(x, [](double v) { return v * v; });
  EXPECT_EQ(sq[3], 16.0);
}

TEST(Tensor, ShapeMismatchRejected) {
  EXPECT_THROW(add(zeros<double>({1, 1, 2, 2}), zeros<double>({1, 1, 2, 3})), ShapeError);
  EXPECT_THROW(mul(zeros<double>({1, 2, 2, 2}), zeros<double>({1, 1, 2, 2})), ShapeError);
}

TEST(Tensor, SliceAndStack) {
  Tensor<double> x({2, 3, 2, 2});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const auto a = slice_batch(x, 0, 1), b = slice_batch(x, 1, 2);
  const std::vector<Tensor<double>> parts = {a, b};
  EXPECT_EQ(stack_batch<double>(parts), x);
  const auto c = slice_channels(x, 1, 3);
  EXPECT_EQ(c.shape(), (Shape{2, 2, 2, 2}));
  EXPECT_EQ(c(1, 0, 1, 1), x(1, 1, 1, 1));
}

TEST(Init, XavierBoundForEqualFans) {
  Rng rng(1);
  const auto w = xavier_init<double>({1, 1, 100, 100}, 3, 3, rng);
  EXPECT_LE(max_abs(w), 1.0);
  EXPECT_GT(max_abs(w), 0.99);
}

TEST(Init, XavierVariance) {
  Rng rng(2);
  const std::size_t fan_in = 9, fan_out = 16;
  const auto w = xavier_init<double>({1, 1, 1, 100000}, fan_in, fan_out, rng);
  const double expected = 2.0 / static_cast<double>(fan_in + fan_out);
  EXPECT_NEAR(sample_variance(w), expected, 0.05 * expected);
}

TEST(Init, HeUniformBoundAndVariance) {
  Rng rng(3);
  const auto w = he_uniform_init<double>({1, 1, 1, 100000}, 6, rng);
  EXPECT_LE(max_abs(w), 1.0);
  EXPECT_NEAR(sample_variance(w), 2.0 / 6.0, 0.05 * 2.0 / 6.0);
}

TEST(Init, SameSeedSameTensor) {
  Rng a(42), b(42), c(43);
  const auto x = xavier_init<float>({4, 3, 3, 3}, 27, 36, a);
  EXPECT_EQ(x, xavier_init<float>({4, 3, 3, 3}, 27, 36, b));
  EXPECT_NE(x, xavier_init<float>({4, 3, 3, 3}, 27, 36, c));
}

TEST(Init, ZeroFanRejected) {
  Rng rng(0);
  EXPECT_THROW(xavier_init<double>({1, 1, 1, 1}, 0, 1, rng), ContractError);
  EXPECT_THROW(he_uniform_init<double>({1, 1, 1, 1}, 0, rng), ContractError);
}

TEST(Rng, DerivedStreamsAreStableAndDistinct) {
  const Rng root(7);
  Rng a = root.derive("x"), b = root.derive("x"), c = root.derive("y"), d = root.derive("x", 1);
  const auto va = a.next_u64();
  EXPECT_EQ(va, b.next_u64());
  EXPECT_NE(va, c.next_u64());
  EXPECT_NE(va, d.next_u64());
}

TEST(Rng, PermutationIsAPermutation) {
  Rng rng(5);
  auto p = rng.permutation(50);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(p[i], i);
}

TEST(Rng, BelowStaysInRange) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(7), 7u);
}
