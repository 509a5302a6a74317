// Copyright 2026 The emotrans Authors
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

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "emotrans/grad_check.h"
#include "emotrans/grad_suite.h"
#include "emotrans/losses.h"
#include "emotrans/ops.h"
#include "test_util.h"

namespace emotrans {
namespace {

using testing::bit_identical;
using testing::uniform_tensor;

using TD = Tensor<double>;

TD td(Shape s, std::vector<double> v) { return TD(std::move(s), std::move(v)); }

TEST(Conv1d, HandEvaluatedCrossCorrelation) {
  Tape<double> tape;
  auto x = tape.constant(td({1, 3}, {1, 2, 3}));
  auto w = tape.constant(td({1, 1, 3}, {1, 0, -1}));
  const auto y = conv1d(x, w, 1, 0).value();
  ASSERT_EQ(y.shape(), (Shape{1, 1}));
  EXPECT_DOUBLE_EQ(y[0], -2.0);
}

TEST(Conv1d, UnitKernelIsIdentity) {
  std::mt19937_64 rng(1);
  Tape<double> tape;
  const TD in = uniform_tensor<double>({1, 17}, rng);
  const auto y = conv1d(tape.constant(in), tape.constant(td({1, 1, 1}, {1})), 1, 0).value();
  EXPECT_TRUE(bit_identical(y, in));
}

TEST(Conv1d, StridedShape) {
  Tape<double> tape;
  auto y = conv1d(tape.constant(TD({2, 128})), tape.constant(TD({3, 2, 5})), 2, 2);
  EXPECT_EQ(y.shape(), (Shape{3, 64}));
}

TEST(Conv1d, ChannelMismatchNamesAxis) {
  Tape<double> tape;
  try {
    conv1d(tape.constant(TD({2, 8})), tape.constant(TD({1, 3, 3})), 1, 1);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos);
  }
  EXPECT_THROW(conv1d(tape.constant(TD({1, 2})), tape.constant(TD({1, 1, 5})), 1, 0),
               DimensionError);
}

TEST(Conv2d, HandEvaluatedSum) {
  Tape<double> tape;
  auto y = conv2d(tape.constant(TD({1, 2, 2}, 1.0)), tape.constant(TD({1, 1, 2, 2}, 1.0)), {});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1}));
  EXPECT_DOUBLE_EQ(y.value()[0], 4.0);
}

TEST(Conv2d, UnitKernelIsIdentity) {
  std::mt19937_64 rng(2);
  Tape<double> tape;
  const TD in = uniform_tensor<double>({1, 5, 7}, rng);
  auto y = conv2d(tape.constant(in), tape.constant(TD({1, 1, 1, 1}, 1.0)), {});
  EXPECT_TRUE(bit_identical(y.value(), in));
}

TEST(Conv2d, StridedShape) {
  Tape<double> tape;
  auto y = conv2d(tape.constant(TD({1, 24, 128})), tape.constant(TD({4, 1, 3, 3})), {2, 2, 1, 1});
  EXPECT_EQ(y.shape(), (Shape{4, 12, 64}));
}

TEST(Glu, Examples) {
  Tape<double> tape;
  EXPECT_DOUBLE_EQ(glu(tape.constant(td({2}, {2, 0}))).value()[0], 1.0);
  EXPECT_NEAR(glu(tape.constant(td({2}, {3, 40}))).value()[0], 3.0, 1e-12 * 3 + 1e-12);
  EXPECT_NEAR(glu(tape.constant(td({2}, {3, std::log(3.0)}))).value()[0], 2.25, 1e-15);
  EXPECT_THROW(glu(tape.constant(TD({3, 2}))), DimensionError);
}

TEST(InstanceNorm, HandEvaluatedChannel) {
  Tape<double> tape;
  auto y = instance_norm(tape.constant(td({1, 3}, {1, 2, 3})), tape.constant(td({1}, {1})),
                         tape.constant(td({1}, {0})), 0.0)
               .value();
  const double s = std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(y[0], -1.0 / s, 1e-6);
  EXPECT_NEAR(y[1], 0.0, 1e-12);
  EXPECT_NEAR(y[2], 1.0 / s, 1e-6);
  EXPECT_NEAR(y[0], -1.224745, 1e-6);
}

TEST(InstanceNorm, ConstantChannelGivesBeta) {
  Tape<double> tape;
  auto y = instance_norm(tape.constant(TD({2, 5}, 3.0)), tape.constant(TD({2}, 1.0)),
                         tape.constant(td({2}, {0.5, -1})), 1e-9)
               .value();
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_DOUBLE_EQ(y[t], 0.5);
    EXPECT_DOUBLE_EQ(y[5 + t], -1.0);
  }
}

TEST(InstanceNorm, StandardizesEveryChannel) {
  std::mt19937_64 rng(3);
  Tape<double> tape;
  const TD x = uniform_tensor<double>({6, 128}, rng, -5, 9);
  auto y = instance_norm(tape.constant(x), tape.constant(TD({6}, 1.0)), tape.constant(TD({6})),
                         1e-9)
               .value();
  for (std::size_t c = 0; c < 6; ++c) {
    double m = 0, v = 0;
    for (std::size_t t = 0; t < 128; ++t) m += y[c * 128 + t] / 128;
    for (std::size_t t = 0; t < 128; ++t) v += (y[c * 128 + t] - m) * (y[c * 128 + t] - m) / 128;
    EXPECT_NEAR(m, 0.0, 1e-6);
    EXPECT_NEAR(v, 1.0, 1e-4);
  }
}

TEST(PixelShuffle, Examples) {
  Tape<double> tape;
  EXPECT_EQ(pixel_shuffle_1d(tape.constant(TD({4, 2})), 2).shape(), (Shape{2, 4}));
  auto y = pixel_shuffle_1d(tape.constant(td({2, 2}, {1, 2, 3, 4})), 2).value();
  EXPECT_EQ(y.shape(), (Shape{1, 4}));
  EXPECT_EQ(y.storage(), (std::vector<double>{1, 3, 2, 4}));
  EXPECT_THROW(pixel_shuffle_1d(tape.constant(TD({3, 2})), 2), DimensionError);
}

TEST(PixelShuffle, InverseIsBitExact) {
  std::mt19937_64 rng(4);
  Tensor<float> x = uniform_tensor<float>({12, 9}, rng);
  Tape<float> tape;
  auto round = pixel_unshuffle_1d(pixel_shuffle_1d(tape.constant(x), 3), 3).value();
  EXPECT_TRUE(bit_identical(round, x));
}

TEST(Backward, SquareAndSum) {
  Tape<double> tape;
  auto x = tape.leaf(td({1}, {3}), true);
  EXPECT_DOUBLE_EQ(tape.backward(square(x), std::span(&x, 1))[0][0], 6.0);

  std::mt19937_64 rng(5);
  auto v = tape.leaf(uniform_tensor<double>({3, 4}, rng), true);
  const auto g = tape.backward(sum(v), std::span(&v, 1))[0];
  for (double e : g.data()) EXPECT_EQ(e, 1.0);
}

TEST(Backward, NonScalarOutputIsContractError) {
  Tape<double> tape;
  auto x = tape.leaf(TD({3}, 1.0), true);
  EXPECT_THROW(tape.backward(scale(x, 2.0), std::span(&x, 1)), ContractError);
}

TEST(Backward, ReplayIsBitIdentical) {
  std::mt19937_64 rng(6);
  Tape<float> tape;
  auto x = tape.leaf(uniform_tensor<float>({2, 16}, rng), true);
  auto w = tape.leaf(uniform_tensor<float>({4, 2, 3}, rng), true);
  auto loss = mean(abs(glu(conv1d(x, w, 1, 1))));
  const Var<float> wrt[] = {x, w};
  const auto a = tape.backward(loss, wrt);
  const auto b = tape.backward(loss, wrt);
  EXPECT_TRUE(bit_identical(a[0], b[0]));
  EXPECT_TRUE(bit_identical(a[1], b[1]));
}

TEST(Backward, CreateGraphThroughUnsupportedOpIsContractError) {
  Tape<double> tape;
  auto x = tape.leaf(td({2}, {0.3, 0.4}), true);
  auto y = sum(exp(x));
  try {
    tape.gradient(y, std::span(&x, 1), true);
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("exp"), std::string::npos) << e.what();
  }
}

TEST(Backward, NonFiniteValueNamesOp) {
  Tape<double> tape;
  auto x = tape.leaf(td({1}, {-1}), true);
  try {
    log(x);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("log"), std::string::npos) << e.what();
  }
}

TEST(GradCheck, L1AwayFromKinks) {
  std::mt19937_64 rng(7);
  TD target = uniform_tensor<double>({5, 6}, rng);
  TD point = target;
  for (auto& v : point.data()) v += (v > 0 ? 0.3 : -0.3);
  auto f = [&](Tape<double>& tape, const Var<double>& x) {
    return mean(abs(sub(x, tape.constant(target))));
  };
  EXPECT_LT(grad_check(f, point).max_relative_error, 1e-6);
}

TEST(GradCheck, SecondOrderPenaltyMatchesFiniteDifferences) {
  // d/dw of (|grad_x D(x)| - 1)^2 for D(x) = sum(glu(conv2d(x, w))).
  std::mt19937_64 rng(8);
  const TD x0 = uniform_tensor<double>({1, 4, 6}, rng);
  const TD w0 = uniform_tensor<double>({2, 1, 3, 3}, rng);
  auto f = [&](Tape<double>& tape, const Var<double>& w) {
    CriticFn<double> critic = [&](const Var<double>& in) {
      return mean(leaky_relu(glu(conv2d(in, w, {1, 1, 1, 1})), 0.2));
    };
    return gradient_penalty(critic, tape, x0);
  };
  EXPECT_LT(grad_check(f, w0).max_relative_error, 1e-4);
}

TEST(GradSuite, EveryOpAndLossWithinTolerance) {
  const auto entries = run_grad_suite();
  ASSERT_GE(entries.size(), 40u);
  for (const auto& e : entries) {
    EXPECT_TRUE(e.passed()) << e.name << " rel err " << e.max_relative_error;
    EXPECT_EQ(e.tolerance, e.group == "op" ? 1e-5 : 1e-4) << e.name;
  }
}

}  // namespace
}  // namespace emotrans
