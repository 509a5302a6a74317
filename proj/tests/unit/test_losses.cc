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
#include "emotrans/losses.h"
#include "test_util.h"

namespace emotrans {
namespace {

using TD = Tensor<double>;
using testing::uniform_tensor;

constexpr double kLn2 = std::numbers::ln2;

Batch<double> scalars(Tape<double>& tape, std::initializer_list<double> values) {
  Batch<double> out;
  for (double v : values) out.push_back(tape.constant(TD({1}, v)));
  return out;
}

Batch<double> tensors(Tape<double>& tape, std::initializer_list<TD> values) {
  Batch<double> out;
  for (const auto& v : values) out.push_back(tape.constant(v));
  return out;
}

double value(const Var<double>& v) { return v.value()[0]; }

TEST(GanLoss, EvenCritic) {
  Tape<double> tape;
  const auto l = adv_loss_gan(scalars(tape, {0.5}), scalars(tape, {0.5}));
  EXPECT_NEAR(value(l.critic), 2 * kLn2, 1e-12);
  EXPECT_NEAR(value(l.critic), 1.3863, 1e-4);
  EXPECT_NEAR(value(l.generator), kLn2, 1e-12);
}

TEST(GanLoss, PerfectCriticApproachesZero) {
  Tape<double> tape;
  const auto l = adv_loss_gan(scalars(tape, {1 - 1e-9, 1 - 1e-9}), scalars(tape, {1e-9, 1e-9}));
  EXPECT_GE(value(l.critic), 0.0);
  EXPECT_LT(value(l.critic), 1e-8);
}

TEST(GanLoss, OutputsOutsideOpenIntervalAreRejected) {
  Tape<double> tape;
  EXPECT_THROW(adv_loss_gan(scalars(tape, {1.0}), scalars(tape, {0.5})), ContractError);
  EXPECT_THROW(adv_loss_gan(scalars(tape, {0.5}), scalars(tape, {0.0})), ContractError);
  EXPECT_THROW(adv_loss_gan(scalars(tape, {0.5}), scalars(tape, {-0.2})), ContractError);
}

TEST(GanLoss, LogitFormAgreesWithProbabilityForm) {
  Tape<double> tape;
  const auto sig = [](double z) { return 1 / (1 + std::exp(-z)); };
  const auto p = adv_loss_gan(scalars(tape, {sig(0.7), sig(-1.2)}), scalars(tape, {sig(0.1), sig(2.5)}));
  const auto z = adv_loss_gan_logits(scalars(tape, {0.7, -1.2}), scalars(tape, {0.1, 2.5}));
  EXPECT_NEAR(value(p.critic), value(z.critic), 1e-12);
  EXPECT_NEAR(value(p.generator), value(z.generator), 1e-12);
}

TEST(GanLoss, GeneratorGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  const TD x = uniform_tensor<double>({6}, rng);
  const TD w0 = uniform_tensor<double>({6}, rng);
  auto f = [&](Tape<double>& tape, const Var<double>& w) {
    const Batch<double> fake{sigmoid(sum(mul(w, tape.constant(x))))};
    return adv_loss_gan(scalars(tape, {0.7}), fake).generator;
  };
  EXPECT_LT(grad_check(f, w0).max_relative_error, 1e-4);
}

// D(x) = w . x, so grad_x D = w everywhere.
CriticFn<double> linear_critic(Tape<double>& tape, const TD& w) {
  const auto wv = tape.constant(w);
  return [wv](const Var<double>& in) { return reshape(sum(mul(wv, in)), Shape{1}); };
}

TEST(GradientPenalty, UnitNormLinearCriticIsExactlyZero) {
  Tape<double> tape;
  const TD w({4}, 0.5);
  std::mt19937_64 rng(2);
  EXPECT_EQ(value(gradient_penalty(linear_critic(tape, w), tape, uniform_tensor<double>({4}, rng))),
            0.0);
  const auto l = adv_loss_wgan_gp(linear_critic(tape, w),
                                  tensors(tape, {uniform_tensor<double>({4}, rng)}),
                                  tensors(tape, {uniform_tensor<double>({4}, rng)}), 5.0, rng);
  EXPECT_EQ(value(l.penalty), 0.0);
}

TEST(GradientPenalty, NormTwoWithLambdaFive) {
  Tape<double> tape;
  const TD w({4}, 1.0);
  std::mt19937_64 rng(3);
  const TD real = uniform_tensor<double>({4}, rng);
  const TD fake = uniform_tensor<double>({4}, rng);
  const auto l = adv_loss_wgan_gp(linear_critic(tape, w), tensors(tape, {real}),
                                  tensors(tape, {fake}), 5.0, rng);
  EXPECT_NEAR(value(l.penalty), 1.0, 1e-12);
  double d_real = 0, d_fake = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    d_real += real[i];
    d_fake += fake[i];
  }
  EXPECT_NEAR(value(l.critic), d_fake - d_real + 5.0, 1e-12);
  EXPECT_NEAR(value(l.generator), -d_fake, 1e-12);
}

TEST(GradientPenalty, WeightGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const TD point = uniform_tensor<double>({5}, rng);
  const TD w0 = uniform_tensor<double>({5}, rng, 0.3, 1.5);
  auto f = [&](Tape<double>& tape, const Var<double>& w) {
    CriticFn<double> critic = [&](const Var<double>& in) {
      return reshape(sum(mul(w, leaky_relu(in, 0.2))), Shape{1});
    };
    return gradient_penalty(critic, tape, point);
  };
  EXPECT_LT(grad_check(f, w0).max_relative_error, 1e-4);
}

TEST(GradientPenalty, UnsupportedOpOnCriticPathIsNamed) {
  Tape<double> tape;
  CriticFn<double> critic = [](const Var<double>& in) { return reshape(sum(exp(in)), Shape{1}); };
  try {
    gradient_penalty(critic, tape, TD({3}, 0.1));
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("exp"), std::string::npos) << e.what();
  }
}

TEST(CycleLoss, IdentityIsZero) {
  std::mt19937_64 rng(5);
  Tape<double> tape;
  const auto x = tensors(tape, {uniform_tensor<double>({24, 8}, rng)});
  const auto y = tensors(tape, {uniform_tensor<double>({24, 8}, rng)});
  EXPECT_EQ(value(cycle_loss(x, x, y, y)), 0.0);
}

TEST(CycleLoss, HandEvaluated) {
  Tape<double> tape;
  const auto x = tensors(tape, {TD({2}, {1, 1})});
  const auto xc = tensors(tape, {TD({2}, {1.5, 0.5})});
  const auto y = tensors(tape, {TD({2}, {3, -1})});
  EXPECT_DOUBLE_EQ(value(cycle_loss(x, xc, y, y)), 0.5);
}

TEST(CycleLoss, SymmetricInDirections) {
  std::mt19937_64 rng(6);
  Tape<double> tape;
  Batch<double> x, xc, y, yc;
  for (int i = 0; i < 3; ++i) {
    x.push_back(tape.constant(uniform_tensor<double>({4, 4}, rng)));
    xc.push_back(tape.constant(uniform_tensor<double>({4, 4}, rng)));
    y.push_back(tape.constant(uniform_tensor<double>({4, 4}, rng)));
    yc.push_back(tape.constant(uniform_tensor<double>({4, 4}, rng)));
  }
  EXPECT_DOUBLE_EQ(value(cycle_loss(x, xc, y, yc)), value(cycle_loss(y, yc, x, xc)));
}

TEST(CycleLoss, ShapeMismatchIsDimensionError) {
  Tape<double> tape;
  const auto a = tensors(tape, {TD({2})});
  const auto b = tensors(tape, {TD({3})});
  EXPECT_THROW(cycle_loss(a, b, a, a), DimensionError);
  EXPECT_THROW(linguistic_loss(a, a, a, b), DimensionError);
}

TEST(LinguisticLoss, IdentityIsZeroAndOffsetCountsPerTerm) {
  std::mt19937_64 rng(7);
  Tape<double> tape;
  TD x = uniform_tensor<double>({24, 8}, rng);
  TD y = uniform_tensor<double>({24, 8}, rng);
  TD xs = x, ys = y;
  for (auto& v : xs.data()) v += 0.2;
  for (auto& v : ys.data()) v += 0.2;
  const auto bx = tensors(tape, {x}), by = tensors(tape, {y});
  EXPECT_EQ(value(linguistic_loss(bx, bx, by, by)), 0.0);
  EXPECT_NEAR(value(linguistic_loss(bx, tensors(tape, {xs}), by, by)), 0.2, 1e-12);
  EXPECT_NEAR(value(linguistic_loss(bx, tensors(tape, {xs}), by, tensors(tape, {ys}))), 0.4, 1e-12);
}

TEST(LinguisticLoss, NeverNegative) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    Tape<double> tape;
    const auto a = tensors(tape, {uniform_tensor<double>({3, 5}, rng)});
    const auto b = tensors(tape, {uniform_tensor<double>({3, 5}, rng)});
    EXPECT_GE(value(linguistic_loss(a, b, b, a)), 0.0);
  }
}

TEST(SpeakerLoss, Examples) {
  Tape<double> tape;
  const auto uniform4 = tensors(tape, {TD({4}, 0.25)});
  EXPECT_NEAR(value(speaker_loss(uniform4, {2}).value), std::log(4.0), 1e-12);
  EXPECT_NEAR(value(speaker_loss(uniform4, {2}).value), 1.3863, 1e-4);
  for (std::size_t k : {2u, 3u, 7u}) {
    const auto u = tensors(tape, {TD({k}, 1.0 / static_cast<double>(k))});
    EXPECT_NEAR(value(speaker_loss(u, {1}).value), std::log(static_cast<double>(k)), 1e-12);
  }
  const auto certain = tensors(tape, {TD({3}, {0, 1, 0})});
  EXPECT_EQ(value(speaker_loss(certain, {1}).value), 0.0);
  const auto quarter = tensors(tape, {TD({3}, {0.25, 0.25, 0.5})});
  const auto half = tensors(tape, {TD({3}, {0.25, 0.25, 0.5})});
  EXPECT_NEAR(value(speaker_loss(quarter, {0}).value) - value(speaker_loss(half, {2}).value), kLn2,
              1e-12);
}

TEST(SpeakerLoss, ZeroProbabilityIsClampedAndFlagged) {
  Tape<double> tape;
  const auto probs = tensors(tape, {TD({2}, {0, 1}), TD({2}, {0.5, 0.5})});
  const auto l = speaker_loss(probs, {0, 0});
  EXPECT_EQ(l.clamped, 1u);
  EXPECT_NEAR(value(l.value), (-std::log(kProbabilityFloor) + kLn2) / 2, 1e-9);
}

GeneratorTerms<double> terms(Tape<double>& tape, double adv_xy, double adv_yx, double cyc,
                             double li, double sv) {
  const auto c = [&](double v) { return tape.constant(TD({1}, v)); };
  return {c(adv_xy), c(adv_yx), c(cyc), c(li), c(sv)};
}

TEST(FullObjective, DefaultWeights) {
  Tape<double> tape;
  const auto t = terms(tape, 0.4, 0.6, 0.1, 0.2, 0.3);
  EXPECT_NEAR(value(full_objective(t, LossWeights{}, AblationFlags{})), 3.3, 1e-12);
}

TEST(FullObjective, ZeroWeightsLeaveAdversarialOnly) {
  Tape<double> tape;
  const auto t = terms(tape, 0.4, 0.6, 0.1, 0.2, 0.3);
  EXPECT_NEAR(value(full_objective(t, LossWeights{0, 0, 0, 0}, AblationFlags{})), 1.0, 1e-12);
}

TEST(FullObjective, CycleOnlyFlagsExcludeTerms) {
  Tape<double> tape;
  const auto t = terms(tape, 0.4, 0.6, 0.1, 0.2, 0.3);
  EXPECT_NEAR(value(full_objective(t, LossWeights{}, AblationFlags{true, false, false})), 2.0,
              1e-12);
  // Disabled terms may be empty vars.
  GeneratorTerms<double> sparse{t.adv_xy, t.adv_yx, t.cycle, {}, {}};
  EXPECT_NEAR(value(full_objective(sparse, LossWeights{}, AblationFlags{true, false, false})), 2.0,
              1e-12);
}

TEST(FullObjective, LinearInEachWeight) {
  Tape<double> tape;
  const auto t = terms(tape, 0.4, 0.6, 0.1, 0.2, 0.3);
  LossWeights w1, w2;
  w2.lambda_cyc = 2 * w1.lambda_cyc;
  const double d = value(full_objective(t, w2, {})) - value(full_objective(t, w1, {}));
  EXPECT_NEAR(d, w1.lambda_cyc * 0.1, 1e-12);
}

TEST(FullObjective, NegativeWeightIsContractError) {
  Tape<double> tape;
  LossWeights w;
  w.lambda_li = -1;
  EXPECT_THROW(full_objective(terms(tape, 0, 0, 0, 0, 0), w, {}), ContractError);
}

TEST(WeightClip, Examples) {
  ModelParameters<float> p(NetworkKind::kCriticX);
  p.add("critic_x.a", Tensor<float>({3}, {0.5f, -0.5f, 0.004f}));
  weight_clip(p, 0.01);
  EXPECT_EQ(p.at("critic_x.a").value.storage(), (std::vector<float>{0.01f, -0.01f, 0.004f}));
  const auto once = p.at("critic_x.a").value;
  weight_clip(p, 0.01);
  EXPECT_TRUE(testing::bit_identical(once, p.at("critic_x.a").value));
}

}  // namespace
}  // namespace emotrans
