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
#include <functional>
#include <sstream>

#include <gtest/gtest.h>

#include "emotrans/checkpoint.h"
#include "emotrans/training.h"
#include "test_util.h"

namespace emotrans {
namespace {

using testing::bit_identical;
using testing::TempDir;
using testing::uniform_tensor;

GeneratorConfig tiny_generator() {
  GeneratorConfig c;
  c.base_channels = 4;
  c.n_residual = 1;
  return c;
}

CriticConfig tiny_critic() {
  CriticConfig c;
  c.base_channels = 2;
  c.n_layers = 2;
  return c;
}

ClassifierConfig tiny_classifier(std::size_t k = 4) {
  ClassifierConfig c;
  c.n_speakers = k;
  c.embedding_dim = 8;
  c.depth = 2;
  c.base_channels = 4;
  return c;
}

TrainingConfig tiny_training(std::uint64_t iterations) {
  TrainingConfig c;
  c.iterations = iterations;
  c.seed = 5;
  return c;
}

// One small synthetic corpus shared by the whole suite.
class TrainingTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("training");
    SynthConfig c;
    c.samples_per_domain = 4;
    c.max_frames = 160;
    std::mt19937_64 rng(1);
    dataset_ = new SynthDataset(synth_dataset(c, dir_->path(), rng));
    data_ = new TrainingData(prepare_training_data(dataset_->domain_a, dataset_->domain_b));
  }
  static void TearDownTestSuite() {
    delete data_;
    delete dataset_;
    delete dir_;
  }

  static TrainerState fresh(std::uint64_t seed = 5) {
    return init_trainer(tiny_generator(), tiny_critic(), tiny_classifier(), seed, data_->stats);
  }

  static std::string run_log(TrainerState& state, const TrainingConfig& config,
                             LoopHooks hooks = {}) {
    std::ostringstream os;
    hooks.metrics = &os;
    hooks.wall_time = false;
    train_loop(state, *data_, config, hooks);
    return os.str();
  }

  static inline TempDir* dir_ = nullptr;
  static inline SynthDataset* dataset_ = nullptr;
  static inline TrainingData* data_ = nullptr;
};

std::uint64_t hash_params(const ModelParameters<float>& params) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& p : params) {
    for (char c : p.name) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.value.data().data());
    for (std::size_t i = 0; i < p.value.size() * sizeof(float); ++i) {
      h = (h ^ bytes[i]) * 1099511628211ull;
    }
  }
  return h;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

// Adam.

TEST(Adam, FirstStepMovesByLearningRate) {
  ModelParameters<double> p;
  p.add("theta", Tensor<double>({1}));
  p[0].grad = Tensor<double>({1}, 1.0);
  auto s = AdamState<double>::zeros(p);
  adam_step(p, s, AdamHyper{});
  EXPECT_NEAR(p[0].value[0], -0.0002, 1e-10);
  EXPECT_NEAR(p[0].value[0], -0.0002 / (1 + 1e-8), 1e-16);
  EXPECT_EQ(s.t, 1u);
  EXPECT_NEAR(s.m[0][0], 0.5, 1e-15);
  EXPECT_NEAR(s.v[0][0], 0.1, 1e-15);
}

TEST(Adam, ZeroGradientIsNoOp) {
  std::mt19937_64 rng(1);
  ModelParameters<float> p;
  p.add("a", uniform_tensor<float>({3, 4}, rng));
  p.add("b", uniform_tensor<float>({5}, rng));
  const auto a0 = p[0].value, b0 = p[1].value;
  p[0].grad = Tensor<float>({3, 4});
  auto s = AdamState<float>::zeros(p);
  for (int i = 0; i < 5; ++i) adam_step(p, s, AdamHyper{});
  EXPECT_TRUE(bit_identical(p[0].value, a0));
  EXPECT_TRUE(bit_identical(p[1].value, b0));
}

TEST(Adam, HundredStepsAreDeterministic) {
  auto run = [] {
    std::mt19937_64 rng(2);
    ModelParameters<float> p;
    p.add("w", uniform_tensor<float>({7, 3}, rng));
    auto s = AdamState<float>::zeros(p);
    for (int i = 0; i < 100; ++i) {
      p[0].grad = uniform_tensor<float>({7, 3}, rng);
      adam_step(p, s, AdamHyper{}, static_cast<std::uint64_t>(i));
    }
    return std::make_pair(p[0].value, s);
  };
  const auto [a, sa] = run();
  const auto [b, sb] = run();
  EXPECT_TRUE(bit_identical(a, b));
  EXPECT_TRUE(bit_identical(sa.m[0], sb.m[0]));
  EXPECT_TRUE(bit_identical(sa.v[0], sb.v[0]));
  EXPECT_EQ(sa.t, 100u);
}

TEST(Adam, NonFiniteGradientNamesParameterAndIteration) {
  ModelParameters<float> p;
  p.add("gen_xy.out.weight", Tensor<float>({2}, 1.0f));
  p[0].grad = Tensor<float>({2}, {0.5f, std::nanf("")});
  auto s = AdamState<float>::zeros(p);
  try {
    adam_step(p, s, AdamHyper{}, 42);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("gen_xy.out.weight"), std::string::npos) << what;
    EXPECT_NE(what.find("42"), std::string::npos) << what;
  }
  EXPECT_EQ(p[0].value[0], 1.0f);
  EXPECT_EQ(s.t, 0u);
}

// train_step.

TEST_F(TrainingTest, AblationOffLeavesOnlyAdversarialTerms) {
  TrainerState state = fresh();
  TrainingConfig config = tiny_training(1);
  config.ablation = {false, false, false};
  auto [bx, by] = sample_batches(*data_, config, state.rng);
  const LossReport r = train_step(state, bx, by, config);
  EXPECT_FALSE(r.loss_cyc);
  EXPECT_FALSE(r.loss_li);
  EXPECT_FALSE(r.loss_sv);
  EXPECT_TRUE(r.gp);
  EXPECT_NEAR(r.loss_g_total, r.loss_adv_g, 1e-6 * (1 + std::fabs(r.loss_adv_g)));
  EXPECT_EQ(state.iteration, 1u);
  const std::string line = to_json_line(r);
  EXPECT_NE(line.find("\"loss_cyc\":0"), std::string::npos) << line;
}

TEST_F(TrainingTest, ReportMatchesLossesRecomputedOnSameBatch) {
  TrainerState state = fresh();
  TrainingConfig config = tiny_training(1);
  config.batch_size = 2;
  auto [bx, by] = sample_batches(*data_, config, state.rng);
  const Models before = state.models;
  const LossReport r = train_step(state, bx, by, config);

  // Generators are last to move, so the pre-step generators with the
  // post-step critics and classifier see exactly what the generator phase saw.
  Tape<float> tape;
  BoundParameters<float> gxy(tape, before.gen_xy.params, false);
  BoundParameters<float> gyx(tape, before.gen_yx.params, false);
  BoundParameters<float> cx(tape, state.models.critic_x.params, false);
  BoundParameters<float> cy(tape, state.models.critic_y.params, false);
  BoundParameters<float> cls(tape, state.models.classifier.params, false);
  auto image = [](const Var<float>& v) { return reshape(v, Shape{1, 24, 128}); };
  Batch<float> x, y, fy, fx, xc, yc, ix, iy, probs, sfy, sfx;
  std::vector<int> labels;
  for (std::size_t i = 0; i < bx.size(); ++i) {
    x.push_back(tape.constant(bx[i].features));
    y.push_back(tape.constant(by[i].features));
    fy.push_back(generator_forward(before.gen_xy, gxy, x[i]));
    fx.push_back(generator_forward(before.gen_yx, gyx, y[i]));
    xc.push_back(generator_forward(before.gen_yx, gyx, fy[i]));
    yc.push_back(generator_forward(before.gen_xy, gxy, fx[i]));
    ix.push_back(generator_forward(before.gen_yx, gyx, x[i]));
    iy.push_back(generator_forward(before.gen_xy, gxy, y[i]));
    sfy.push_back(critic_forward(state.models.critic_y, cy, image(fy[i])));
    sfx.push_back(critic_forward(state.models.critic_x, cx, image(fx[i])));
  }
  for (std::size_t i = 0; i < bx.size(); ++i) {
    probs.push_back(classifier_forward(state.models.classifier, cls, image(fy[i])).probs);
    labels.push_back(bx[i].speaker_id);
  }
  for (std::size_t i = 0; i < by.size(); ++i) {
    probs.push_back(classifier_forward(state.models.classifier, cls, image(fx[i])).probs);
    labels.push_back(by[i].speaker_id);
  }
  const double cyc = cycle_loss(x, xc, y, yc).value()[0];
  const double li = linguistic_loss(x, ix, y, iy).value()[0];
  const double sv = speaker_loss(probs, labels).value.value()[0];
  const double adv = -batch_mean(sfy).value()[0] - batch_mean(sfx).value()[0];
  const auto near = [](double a, double b) { return std::fabs(a - b) <= 1e-5 * (1 + std::fabs(b)); };
  EXPECT_PRED2(near, *r.loss_cyc, cyc);
  EXPECT_PRED2(near, *r.loss_li, li);
  EXPECT_PRED2(near, *r.loss_sv, sv);
  EXPECT_PRED2(near, r.loss_adv_g, adv);
  EXPECT_PRED2(near, r.loss_g_total, adv + 10 * cyc + 5 * li + 1 * sv);
}

TEST_F(TrainingTest, GeneratorPhaseLeavesCriticsAndClassifierAlone) {
  // Same state, different generator learning rates: everything that is not a
  // generator must come out bit-identical.
  TrainerState a = fresh(), b = fresh();
  TrainingConfig ca = tiny_training(1), cb = tiny_training(1);
  cb.lr_generator = 0.05;
  std::mt19937_64 rng(8);
  auto [bx, by] = sample_batches(*data_, ca, rng);
  train_step(a, bx, by, ca);
  train_step(b, bx, by, cb);
  EXPECT_NE(hash_params(a.models.gen_xy.params), hash_params(b.models.gen_xy.params));
  EXPECT_EQ(hash_params(a.models.critic_x.params), hash_params(b.models.critic_x.params));
  EXPECT_EQ(hash_params(a.models.critic_y.params), hash_params(b.models.critic_y.params));
  EXPECT_EQ(hash_params(a.models.classifier.params), hash_params(b.models.classifier.params));
}

TEST_F(TrainingTest, FrozenNetworksReceiveNoUpdate) {
  TrainerState state = fresh();
  const std::uint64_t critic_before = hash_params(state.models.critic_y.params);
  const std::uint64_t cls_before = hash_params(state.models.classifier.params);
  const std::uint64_t gen_before = hash_params(state.models.gen_xy.params);

  std::mt19937_64 rng(3);
  Tape<float> tape;
  BoundParameters<float> g(tape, state.models.gen_xy.params, true);
  BoundParameters<float> c(tape, state.models.critic_y.params, false);
  BoundParameters<float> k(tape, state.models.classifier.params, false);
  auto fake = generator_forward(state.models.gen_xy, g,
                                tape.constant(uniform_tensor<float>({24, 128}, rng)));
  auto image = reshape(fake, Shape{1, 24, 128});
  auto loss = add(sum(critic_forward(state.models.critic_y, c, image)),
                  sum(classifier_forward(state.models.classifier, k, image).embedding));
  const BoundParameters<float>* bound[] = {&g};
  ModelParameters<float>* targets[] = {&state.models.gen_xy.params};
  compute_gradients<float>(tape, loss, bound, targets);
  adam_step(state.models.gen_xy.params, state.optimizers.gen_xy, AdamHyper{});
  adam_step(state.models.critic_y.params, state.optimizers.critic_y, AdamHyper{});
  adam_step(state.models.classifier.params, state.optimizers.classifier, AdamHyper{});

  EXPECT_NE(hash_params(state.models.gen_xy.params), gen_before);
  EXPECT_EQ(hash_params(state.models.critic_y.params), critic_before);
  EXPECT_EQ(hash_params(state.models.classifier.params), cls_before);
}

TEST(LinguisticOnly, DrivesGeneratorTowardIdentity) {
  std::mt19937_64 rng(4);
  auto g = build_generator<float>(tiny_generator(), rng);
  auto opt = AdamState<float>::zeros(g.params);
  const Tensor<float> y = uniform_tensor<float>({24, 128}, rng);
  double previous = INFINITY;
  for (int i = 0; i < 50; ++i) {
    Tape<float> tape;
    BoundParameters<float> bound(tape, g.params, true);
    const Batch<float> by{tape.constant(y)};
    const Batch<float> mapped{generator_forward(g, bound, by[0])};
    auto loss = linguistic_loss(by, mapped, by, by);
    const double value = loss.value()[0];
    EXPECT_LT(value, previous) << "iteration " << i;
    previous = value;
    const BoundParameters<float>* b[] = {&bound};
    ModelParameters<float>* t[] = {&g.params};
    compute_gradients<float>(tape, loss, b, t);
    adam_step(g.params, opt, AdamHyper{});
  }
}

TEST_F(TrainingTest, NonFiniteInputAbortsWithComponentAndIteration) {
  TrainerState state = fresh();
  TrainingConfig config = tiny_training(1);
  auto [bx, by] = sample_batches(*data_, config, state.rng);
  bx[0].features.data()[17] = std::numeric_limits<float>::infinity();
  try {
    train_step(state, bx, by, config);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos) << e.what();
  }
}

// train_loop.

TEST_F(TrainingTest, EmptyManifestIsRejectedBeforeTraining) {
  DatasetManifest empty = dataset_->domain_b;
  empty.entries.clear();
  EXPECT_THROW(prepare_training_data(dataset_->domain_a, empty), ValidationError);
}

TEST_F(TrainingTest, SameSeedSameLog) {
  TrainerState a = fresh(), b = fresh();
  const std::string la = run_log(a, tiny_training(10));
  const std::string lb = run_log(b, tiny_training(10));
  EXPECT_EQ(lines(la).size(), 10u);
  EXPECT_EQ(la, lb);
  EXPECT_EQ(hash_params(a.models.gen_yx.params), hash_params(b.models.gen_yx.params));
}

TEST_F(TrainingTest, ResumeReproducesUninterruptedRun) {
  TempDir dir("resume");
  TrainingConfig config = tiny_training(20);
  config.checkpoint_every = 10;

  TrainerState full = fresh();
  LoopHooks hooks;
  hooks.on_checkpoint = [&](const TrainerState& s) {
    if (s.iteration == 10) {
      save_checkpoint(tiny_generator(), tiny_critic(), tiny_classifier(), config, s,
                      dir / "k10.etgc");
    }
  };
  const auto uninterrupted = lines(run_log(full, config, hooks));
  ASSERT_EQ(uninterrupted.size(), 20u);

  Checkpoint ck = load_checkpoint(dir / "k10.etgc");
  ASSERT_EQ(ck.state.iteration, 10u);
  EXPECT_EQ(ck.training, config);
  const auto resumed = lines(run_log(ck.state, ck.training));
  ASSERT_EQ(resumed.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(resumed[i], uninterrupted[10 + i]);
  EXPECT_EQ(hash_params(ck.state.models.gen_xy.params), hash_params(full.models.gen_xy.params));
}

// transfer_init.

TEST_F(TrainingTest, TransferKeepsEverythingButTheHead) {
  TempDir dir("transfer");
  TrainerState src = fresh();
  run_log(src, tiny_training(3));
  save_checkpoint(tiny_generator(), tiny_critic(), tiny_classifier(), tiny_training(3), src,
                  dir / "src.etgc");

  TransferPlan plan;
  plan.source_checkpoint = dir / "src.etgc";
  plan.generator = tiny_generator();
  plan.critic = tiny_critic();
  plan.classifier = tiny_classifier(2);
  plan.seed = 99;
  const TrainerState dst = transfer_init(plan, data_->stats);

  std::size_t migrated = 0;
  const auto check = [&](const ModelParameters<float>& s, const ModelParameters<float>& d) {
    for (const auto& p : s) {
      if (!is_migrated_parameter(p.name)) continue;
      ++migrated;
      EXPECT_TRUE(bit_identical(p.value, d.at(p.name).value)) << p.name;
    }
  };
  check(src.models.gen_xy.params, dst.models.gen_xy.params);
  check(src.models.gen_yx.params, dst.models.gen_yx.params);
  check(src.models.critic_x.params, dst.models.critic_x.params);
  check(src.models.critic_y.params, dst.models.critic_y.params);
  check(src.models.classifier.params, dst.models.classifier.params);
  EXPECT_GT(migrated, 20u);

  const auto& head = dst.models.classifier.params.at("classifier.head.weight").value;
  EXPECT_EQ(head.shape(), (Shape{8, 2}));
  EXPECT_EQ(dst.iteration, 0u);
  EXPECT_EQ(dst.optimizers.gen_xy.t, 0u);
  for (const auto& m : dst.optimizers.gen_xy.m) {
    for (float v : m.data()) ASSERT_EQ(v, 0.0f);
  }
}

TEST_F(TrainingTest, TransferIntoOtherTopologyIsNamed) {
  TrainerState src = fresh();
  TransferPlan plan;
  plan.generator = tiny_generator();
  plan.generator.n_residual = 2;
  plan.critic = tiny_critic();
  plan.classifier = tiny_classifier(2);
  try {
    transfer_init(src.models, plan, data_->stats);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("res2"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace emotrans
