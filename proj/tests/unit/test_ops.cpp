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
#include <random>

#include "ctxh/error.hpp"
#include "ctxh/ops.hpp"
#include "oracles.hpp"

using namespace ctxh;
using namespace ctxh::testing;

namespace {

ConvFilter<double> random_filter(std::size_t o, std::size_t c, std::size_t k, std::mt19937_64& gen) {
  return {random_tensor({o, c, k, k}, gen), random_tensor({1, o, 1, 1}, gen)};
}

}  // namespace

// --- conv2d_same ---------------------------------------------------------

TEST(Conv2dSame, HandSumsOnOnes) {
  const auto out = conv2d_same(ones<double>({1, 1, 3, 3}), ConvFilter<double>{ones<double>({1, 1, 3, 3}),
                                                                              zeros<double>({1, 1, 1, 1})});
  EXPECT_EQ(out(0, 0, 1, 1), 9.0);
  EXPECT_EQ(out(0, 0, 0, 0), 4.0);
  EXPECT_EQ(out(0, 0, 2, 2), 4.0);
  EXPECT_EQ(out(0, 0, 0, 1), 6.0);
  EXPECT_EQ(out(0, 0, 1, 2), 6.0);
}

TEST(Conv2dSame, DeltaKernelIsIdentity) {
  std::mt19937_64 gen(1);
  const auto x = random_tensor({2, 1, 5, 6}, gen);
  auto f = ConvFilter<double>::zeros(1, 1, 3);
  f.weights(0, 0, 1, 1) = 1.0;
  EXPECT_EQ(conv2d_same(x, f), x);
}

TEST(Conv2dSame, MatchesNaiveOracle) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_tensor({2, 3, 5, 5}, gen);
    const auto f = random_filter(4, 3, trial % 2 ? 5 : 3, gen);
    EXPECT_LT(max_abs_diff(conv2d_same(x, f), naive_conv_same(x, f.weights, f.bias)), 1e-12);
  }
}

TEST(Conv2dSame, ChannelMismatchRejected) {
  EXPECT_THROW(conv2d_same(ones<double>({1, 2, 4, 4}), ConvFilter<double>::zeros(1, 3, 3)), ShapeError);
}

TEST(Conv2dSame, FloatAgreesWithDouble) {
  std::mt19937_64 gen(3);
  const auto x = random_tensor({1, 2, 6, 6}, gen);
  const auto f = random_filter(3, 2, 3, gen);
  const ConvFilter<float> ff{f.weights.cast<float>(), f.bias.cast<float>()};
  const auto yf = conv2d_same(x.cast<float>(), ff).cast<double>();
  EXPECT_LT(max_abs_diff(yf, conv2d_same(x, f)), 1e-5);
}

// --- transposed_conv2d ---------------------------------------------------

TEST(TransposedConv, SinglePixelSpreadsOverKernel) {
  const auto out = transposed_conv2d(full<double>({1, 1, 1, 1}, 2.5),
                                     ConvFilter<double>{ones<double>({1, 1, 2, 2}), zeros<double>({1, 1, 1, 1})});
  EXPECT_EQ(out, full<double>({1, 1, 2, 2}, 2.5));
}

TEST(TransposedConv, DoublesSpatialSize) {
  const auto out = transposed_conv2d(ones<double>({2, 3, 4, 5}), ConvFilter<double>::zeros(6, 3, 2));
  EXPECT_EQ(out.shape(), (Shape{2, 6, 8, 10}));
}

TEST(TransposedConv, MatchesZeroStuffingOracle) {
  std::mt19937_64 gen(4);
  for (std::size_t k : {2u, 3u}) {
    const auto x = random_tensor({2, 3, 3, 4}, gen);
    const auto f = random_filter(2, 3, k, gen);
    EXPECT_LT(max_abs_diff(transposed_conv2d(x, f), zero_stuffed_transposed_conv(x, f.weights, f.bias, 2)), 1e-12);
  }
}

TEST(TransposedConv, LinearInInput) {
  std::mt19937_64 gen(5);
  const auto x = random_tensor({1, 2, 3, 3}, gen);
  auto f = random_filter(2, 2, 2, gen);
  f.bias.fill(0.0);
  EXPECT_LT(max_abs_diff(transposed_conv2d(scale(x, 3.0), f), scale(transposed_conv2d(x, f), 3.0)), 1e-12);
}

TEST(TransposedConv, ChannelMismatchRejected) {
  EXPECT_THROW(transposed_conv2d(ones<double>({1, 2, 4, 4}), ConvFilter<double>::zeros(1, 3, 2)), ShapeError);
}

// --- maxpool2 -------------------------------------------------------------

TEST(MaxPool, TwoByTwo) {
  const auto out = maxpool2(Tensor<double>({1, 1, 2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(out.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(out[0], 4.0);
}

TEST(MaxPool, TieRoutesGradientToFirstElement) {
  Tape<double> tape;
  auto x = tape.leaf(full<double>({1, 1, 2, 4}, 1.0));
  auto y = maxpool2(x);
  EXPECT_EQ(y.value(), full<double>({1, 1, 1, 2}, 1.0));
  tape.backward(sum(y));
  EXPECT_EQ(x.grad(), Tensor<double>({1, 1, 2, 4}, {1, 0, 1, 0, 0, 0, 0, 0}));
}

TEST(MaxPool, MatchesBlockMaxOracle) {
  std::mt19937_64 gen(6);
  const auto x = random_tensor({2, 3, 8, 8}, gen);
  EXPECT_EQ(maxpool2(x), block_max(x));
}

TEST(MaxPool, OddDimensionsRejected) {
  EXPECT_THROW(maxpool2(ones<double>({1, 1, 3, 4})), ShapeError);
  EXPECT_THROW(maxpool2(ones<double>({1, 1, 4, 5})), ShapeError);
}

// --- selu ----------------------------------------------------------------

TEST(Selu, Constants) {
  const auto y = selu(Tensor<double>({1, 1, 1, 3}, {0.0, 1.0, -50.0}));
  EXPECT_EQ(y[0], 0.0);
  EXPECT_NEAR(y[1], 1.0507009873554805, 1e-15);
  EXPECT_NEAR(y[2], -1.7580993408473766, 1e-12);
}

TEST(Selu, MatchesScalarOracle) {
  std::mt19937_64 gen(7);
  const auto x = random_tensor({1, 2, 5, 5}, gen, -4.0, 4.0);
  const auto y = selu(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], selu_scalar(x[i]), 1e-14);
}

TEST(Selu, PreservesUnitGaussianMoments) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> normal;
  Tensor<double> x({1, 1, 1, 200000});
  for (double& v : x.data()) v = normal(gen);
  const auto y = selu(x);
  double mean = 0.0, sq = 0.0;
  for (double v : y.data()) mean += v;
  mean /= static_cast<double>(y.size());
  for (double v : y.data()) sq += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(sq / static_cast<double>(y.size()), 1.0, 0.02);
}

// --- concat ----------------------------------------------------------------

TEST(Concat, ShapesAndSlices) {
  std::mt19937_64 gen(9);
  const auto a = random_tensor({1, 2, 4, 4}, gen), b = random_tensor({1, 3, 4, 4}, gen);
  const auto c = concat_channels(a, b);
  EXPECT_EQ(c.shape(), (Shape{1, 5, 4, 4}));
  EXPECT_EQ(slice_channels(c, 0, 2), a);
  EXPECT_EQ(slice_channels(c, 2, 5), b);
}

TEST(Concat, SpatialMismatchRejected) {
  EXPECT_THROW(concat_channels(ones<double>({1, 1, 4, 4}), ones<double>({1, 1, 4, 2})), ShapeError);
}

// --- context index map ---------------------------------------------------

TEST(ContextIndexMap, Examples) {
  EXPECT_EQ(context_index_map(5, 0, 4, 4, 8, 8).row, 2u);
  EXPECT_EQ(context_index_map(0, 6, 3, 3, 7, 7).col, 2u);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(context_index_map(i, j, 5, 6, 5, 6), (GridIndex{i, j}));
}

TEST(ContextIndexMap, ContractViolationsRejected) {
  EXPECT_THROW(context_index_map(8, 0, 4, 4, 8, 8), ContractError);
  EXPECT_THROW(context_index_map(0, 0, 9, 4, 8, 8), ContractError);
  EXPECT_THROW(context_index_map(0, 0, 0, 4, 8, 8), ContractError);
}

TEST(ContextIndexMap, PropertiesOnSmallGrid) {
  for (std::size_t large = 1; large <= 12; ++large) {
    for (std::size_t small = 1; small <= large; ++small) {
      const auto axis = kernels::context_axis_map(small, large);
      ASSERT_EQ(axis.size(), large);
      for (std::size_t i = 0; i < large; ++i) {
        EXPECT_EQ(axis[i], i * small / large);
        EXPECT_LT(axis[i], small);
        if (i > 0) {
          EXPECT_LE(axis[i - 1], axis[i]);
        }
      }
      EXPECT_EQ(axis.front(), 0u);
    }
  }
}

// --- contextual conv -------------------------------------------------------

TEST(ContextualConv, EqualSizesReduceToPointwiseSum) {
  std::mt19937_64 gen(10);
  const auto small = random_tensor({1, 2, 4, 4}, gen), large = random_tensor({1, 3, 4, 4}, gen);
  const ContextLink<double> link{random_filter(2, 2, 3, gen), random_filter(2, 3, 3, gen)};
  const auto expected = selu(add(conv2d_same(large, link.bank_large), conv2d_same(small, link.bank_small)));
  EXPECT_LT(max_abs_diff(contextual_conv(small, large, link), expected), 1e-14);
}

TEST(ContextualConv, ZeroBanksGiveZero) {
  std::mt19937_64 gen(11);
  const ContextLink<double> link{ConvFilter<double>::zeros(2, 1, 3), ConvFilter<double>::zeros(2, 1, 3)};
  const auto out = contextual_conv(random_tensor({1, 1, 2, 2}, gen), random_tensor({1, 1, 8, 8}, gen), link);
  EXPECT_EQ(out, zeros<double>({1, 2, 8, 8}));
}

TEST(ContextualConv, MatchesNaiveOracle) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 5; ++trial) {
    const auto small = random_tensor({2, 3, 4, 4}, gen), large = random_tensor({2, 2, 8, 8}, gen);
    const ContextLink<double> link{random_filter(4, 3, 3, gen), random_filter(4, 2, 3, gen)};
    const auto expected = naive_contextual_conv(small, large, link.bank_small.weights, link.bank_small.bias,
                                                link.bank_large.weights, link.bank_large.bias);
    EXPECT_LT(max_abs_diff(contextual_conv(small, large, link), expected), 1e-12);
  }
}

TEST(ContextualConv, NonPowerOfTwoSizes) {
  std::mt19937_64 gen(13);
  const auto small = random_tensor({1, 1, 3, 2}, gen), large = random_tensor({1, 1, 7, 5}, gen);
  const ContextLink<double> link{random_filter(2, 1, 1, gen), random_filter(2, 1, 3, gen)};
  const auto expected = naive_contextual_conv(small, large, link.bank_small.weights, link.bank_small.bias,
                                              link.bank_large.weights, link.bank_large.bias);
  EXPECT_LT(max_abs_diff(contextual_conv(small, large, link), expected), 1e-12);
}

TEST(ContextualConv, ContractViolationsRejected) {
  const ContextLink<double> link{ConvFilter<double>::zeros(2, 1, 3), ConvFilter<double>::zeros(2, 1, 3)};
  EXPECT_THROW(contextual_conv(ones<double>({2, 1, 2, 2}), ones<double>({1, 1, 4, 4}), link), ShapeError);
  EXPECT_THROW(contextual_conv(ones<double>({1, 1, 8, 8}), ones<double>({1, 1, 4, 4}), link), ShapeError);
  const ContextLink<double> mismatched{ConvFilter<double>::zeros(3, 1, 3), ConvFilter<double>::zeros(2, 1, 3)};
  EXPECT_THROW(contextual_conv(ones<double>({1, 1, 2, 2}), ones<double>({1, 1, 4, 4}), mismatched), ShapeError);
}

TEST(ContextualConv, GatherGradientIsScatterAdd) {
  // Each small cell receives the count of large cells mapped onto it.
  Tape<double> tape;
  auto small = tape.leaf(ones<double>({1, 1, 2, 3}));
  tape.backward(sum(context_gather(small, 5, 7)));
  Tensor<double> expected({1, 1, 2, 3});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 7; ++j) expected(0, 0, i * 2 / 5, j * 3 / 7) += 1.0;
  EXPECT_EQ(small.grad(), expected);
}

// --- adjoint tests -----------------------------------------------------------

TEST(Adjoint, TransposedConvIsAdjointOfStridedConv) {
  std::mt19937_64 gen(14);
  const auto x = random_tensor({2, 3, 4, 3}, gen);
  const auto w = random_tensor({2, 3, 2, 2}, gen);
  const auto y = transposed_conv2d(x, ConvFilter<double>{w, zeros<double>({1, 2, 1, 1})});
  const auto g = random_tensor(y.shape(), gen);
  const double lhs = dot(y, g);
  const double rhs = dot(x, strided_conv_adjoint_partner(g, w, 2, 4, 3));
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));
}

TEST(Adjoint, ContextualConvJacobianDotProduct) {
  // f(small) = conv(large) + gather(conv(small)) before the SeLU is affine in
  // small, so its Jacobian-vector products are plain differences.
  std::mt19937_64 gen(15);
  const auto small = random_tensor({1, 2, 3, 3}, gen), large = random_tensor({1, 2, 7, 7}, gen);
  const auto ws = random_tensor({3, 2, 3, 3}, gen), bs = random_tensor({1, 3, 1, 1}, gen);
  const auto wl = random_tensor({3, 2, 3, 3}, gen), bl = random_tensor({1, 3, 1, 1}, gen);
  const auto u = random_tensor(small.shape(), gen), v = random_tensor({1, 3, 7, 7}, gen);

  Tape<double> tape;
  auto s = tape.leaf(small);
  auto out = contextual_conv(s, tape.constant(large), tape.leaf(ws), tape.leaf(bs), tape.leaf(wl), tape.leaf(bl));
  tape.backward(sum(mul(out, tape.constant(v))));
  const double jt_v_dot_u = dot(s.grad(), u);

  // J u via the oracle: the SeLU derivative at the output is diagonal.
  const auto pre = [&](const Tensor<double>& sm) {
    const auto cs = naive_conv_same(sm, ws, zeros<double>(bs.shape()));
    Tensor<double> g({1, 3, 7, 7});
    for (std::size_t o = 0; o < 3; ++o)
      for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 7; ++j) g(0, o, i, j) = cs(0, o, i * 3 / 7, j * 3 / 7);
    return g;
  };
  const auto z = add(naive_conv_same(large, wl, bl), add(pre(small), [&] {
                       Tensor<double> b({1, 3, 7, 7});
                       for (std::size_t o = 0; o < 3; ++o)
                         for (std::size_t p = 0; p < 49; ++p) b[o * 49 + p] = bs[o];
                       return b;
                     }()));
  const auto lin = pre(u);
  double ju_dot_v = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = z[i] > 0.0 ? 1.0507009873554805 : 1.0507009873554805 * 1.6732632423543772 * std::exp(z[i]);
    ju_dot_v += d * lin[i] * v[i];
  }
  EXPECT_NEAR(ju_dot_v, jt_v_dot_u, 1e-9 * std::max(1.0, std::abs(ju_dot_v)));
}

// --- losses -----------------------------------------------------------------

TEST(SoftmaxCrossEntropy, EqualLogitsGiveLn2) {
  const LabelMap labels({2, 1, 3, 3}, std::int32_t{1});
  EXPECT_NEAR(softmax_cross_entropy(zeros<double>({2, 2, 3, 3}), labels), std::log(2.0), 1e-15);
}

TEST(SoftmaxCrossEntropy, MonotoneInWrongGap) {
  const LabelMap labels({1, 1, 1, 1}, std::int32_t{0});
  double prev = 0.0;
  for (double gap : {0.0, 1.0, 5.0, 50.0, 500.0}) {
    const double loss = softmax_cross_entropy(Tensor<double>({1, 2, 1, 1}, {0.0, gap}), labels);
    EXPECT_TRUE(std::isfinite(loss));
    EXPECT_GT(loss, prev);
    prev = loss;
  }
}

TEST(SoftmaxCrossEntropy, GradientIsSoftmaxMinusOneHot) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({1, 3, 1, 1}, {1.0, 2.0, 0.5}));
  tape.backward(softmax_cross_entropy(x, LabelMap({1, 1, 1, 1}, std::int32_t{2})));
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(0.5);
  EXPECT_NEAR(x.grad()[0], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(x.grad()[1], std::exp(2.0) / z, 1e-15);
  EXPECT_NEAR(x.grad()[2], std::exp(0.5) / z - 1.0, 1e-15);
}

TEST(SoftmaxCrossEntropy, LabelOutOfRangeRejected) {
  EXPECT_THROW(softmax_cross_entropy(zeros<double>({1, 2, 1, 1}), LabelMap({1, 1, 1, 1}, std::int32_t{2})),
               DataError);
  EXPECT_THROW(softmax_cross_entropy(zeros<double>({1, 2, 1, 1}), LabelMap({1, 1, 1, 1}, std::int32_t{-1})),
               DataError);
}

TEST(MseLoss, Basics) {
  std::mt19937_64 gen(16);
  const auto t = random_tensor({1, 1, 4, 4}, gen);
  EXPECT_EQ(mse_loss(t, t), 0.0);
  EXPECT_NEAR(mse_loss(add(t, ones<double>(t.shape())), t), 1.0, 1e-15);
  EXPECT_THROW(mse_loss(t, zeros<double>({1, 1, 4, 3})), ShapeError);
}
