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

#include <limits>
#include <random>

#include "ctxh/autodiff.hpp"
#include "ctxh/error.hpp"
#include "ctxh/ops.hpp"
#include "oracles.hpp"

using namespace ctxh;
using ctxh::testing::random_tensor;

TEST(Autodiff, GradientOfSumIsOnes) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({1, 2, 3, 3}, 0.5));
  tape.backward(sum(x));
  EXPECT_EQ(x.grad(), ones<double>({1, 2, 3, 3}));
}

TEST(Autodiff, GradientOfSquareIsTwiceInput) {
  std::mt19937_64 gen(1);
  const auto xv = random_tensor({1, 1, 4, 4}, gen);
  Tape<double> tape;
  auto x = tape.leaf(xv);
  tape.backward(sum(mul(x, x)));
  EXPECT_LT(max_abs_diff(x.grad(), scale(xv, 2.0)), 1e-15);
}

TEST(Autodiff, FanOutAccumulates) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({1, 1, 1, 3}, {1, 2, 3}));
  tape.backward(sum(add(x, x)));
  EXPECT_EQ(x.grad(), full<double>({1, 1, 1, 3}, 2.0));
}

TEST(Autodiff, BackwardTwiceDoublesLeafGradients) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({1, 1, 1, 2}, {3, -1}));
  auto loss = sum(mul(x, x));
  tape.backward(loss);
  const auto once = x.grad();
  tape.backward(loss);
  EXPECT_EQ(x.grad(), scale(once, 2.0));
}

TEST(Autodiff, ParameterGradientsAccumulateAcrossTapes) {
  Parameter<double> p{"p", Tensor<double>({1, 1, 1, 2}, {1, 2}), zeros<double>({1, 1, 1, 2})};
  for (int k = 0; k < 2; ++k) {
    Tape<double> tape;
    tape.backward(sum(tape.watch(p)));
  }
  EXPECT_EQ(p.grad, full<double>({1, 1, 1, 2}, 2.0));
  p.zero_grad();
  EXPECT_EQ(sum(p.grad), 0.0);
}

TEST(Autodiff, ConstantsReceiveNoGradient) {
  Tape<double> tape;
  auto c = tape.constant(ones<double>({1, 1, 2, 2}));
  auto x = tape.leaf(ones<double>({1, 1, 2, 2}));
  tape.backward(sum(mul(c, x)));
  EXPECT_FALSE(tape.requires_grad(c.id()));
  EXPECT_EQ(x.grad(), ones<double>({1, 1, 2, 2}));
}

TEST(Autodiff, NonScalarLossRejected) {
  Tape<double> tape;
  auto x = tape.leaf(ones<double>({1, 1, 2, 2}));
  EXPECT_THROW(tape.backward(x), ContractError);
}

TEST(Autodiff, LossFromAnotherTapeRejected) {
  Tape<double> a, b;
  auto loss = sum(a.leaf(ones<double>({1, 1, 1, 1})));
  EXPECT_THROW(b.backward(loss), ContractError);
}

TEST(Autodiff, OpsRecordNames) {
  Tape<double> tape;
  auto x = tape.leaf(ones<double>({1, 1, 2, 2}));
  auto y = sum(selu(x));
  EXPECT_EQ(tape.op_name(y.id()), "sum");
  EXPECT_EQ(tape.op_name(tape.inputs(y.id()).front()), "selu");
}

TEST(FiniteDifference, SumHasZeroError) {
  std::mt19937_64 gen(2);
  const auto x = random_tensor({1, 2, 3, 3}, gen);
  const auto r = finite_difference_check([](Tape<double>&, Var<double> v) { return sum(v); }, x, 1e-4);
  EXPECT_TRUE(r.finite);
  EXPECT_LT(r.max_rel_error, 1e-9);
}

TEST(FiniteDifference, SumOfSquares) {
  std::mt19937_64 gen(3);
  const auto x = random_tensor({1, 2, 3, 3}, gen);
  const auto r = finite_difference_check([](Tape<double>&, Var<double> v) { return sum(mul(v, v)); }, x, 1e-4);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(FiniteDifference, DetectsWrongGradient) {
  std::mt19937_64 gen(4);
  const auto x = random_tensor({1, 1, 3, 3}, gen);
  const auto r = finite_difference_check(
      [](Tape<double>&, Var<double> v) { return sum(scaled_gradient(mul(v, v), 1.5)); }, x, 1e-4);
  EXPECT_FALSE(r.passed(1e-4));
  EXPECT_NEAR(r.max_rel_error, 1.0 / 3.0, 1e-6);
}

TEST(FiniteDifference, NonFiniteFails) {
  const Tensor<double> x({1, 1, 1, 1}, {0.0});
  const auto r = finite_difference_check(
      [](Tape<double>& t, Var<double> v) {
        return mul(t.constant(Tensor<double>({1, 1, 1, 1}, {std::numeric_limits<double>::infinity()})), v);
      },
      x, 1e-4);
  EXPECT_FALSE(r.finite);
}
