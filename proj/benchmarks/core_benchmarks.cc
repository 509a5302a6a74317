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

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "emotrans/evaluation.h"
#include "emotrans/losses.h"
#include "emotrans/networks.h"
#include "emotrans/ops.h"
#include "emotrans/training.h"

namespace emotrans {
namespace {

Tensor<float> random_tensor(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  Tensor<float> t(std::move(shape));
  for (auto& v : t.data()) v = n(rng);
  return t;
}

void BM_Conv1dForward(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const auto x = random_tensor({channels, 128}, rng);
  const auto w = random_tensor({2 * channels, channels, 5}, rng);
  for (auto _ : state) {
    Tape<float> tape;
    GradModeGuard<float> off(tape, false);
    benchmark::DoNotOptimize(conv1d(tape.constant(x), tape.constant(w), 1, 2).value()[0]);
  }
}
BENCHMARK(BM_Conv1dForward)->Arg(16)->Arg(64)->Arg(128);

void BM_Conv2dForwardBackward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto x = random_tensor({8, 12, 64}, rng);
  const auto w = random_tensor({32, 8, 3, 3}, rng);
  for (auto _ : state) {
    Tape<float> tape;
    auto xv = tape.leaf(x, true);
    auto wv = tape.leaf(w, true);
    auto y = sum(square(conv2d(xv, wv, Conv2dGeometry{2, 2, 1, 1})));
    const std::vector<Var<float>> wrt{xv, wv};
    benchmark::DoNotOptimize(tape.backward(y, wrt));
  }
}
BENCHMARK(BM_Conv2dForwardBackward);

void BM_GeneratorInference(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto g = build_generator<float>(GeneratorConfig::desk(), rng);
  const auto x = random_tensor({kMcepDims, static_cast<std::size_t>(state.range(0))}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(generator_apply(g, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GeneratorInference)->Arg(128)->Arg(512);

void BM_GeneratorBackward(benchmark::State& state) {
  std::mt19937_64 rng(4);
  auto g = build_generator<float>(GeneratorConfig::desk(), rng);
  const auto x = random_tensor({kMcepDims, 128}, rng);
  for (auto _ : state) {
    Tape<float> tape;
    BoundParameters<float> bound(tape, g.params, true);
    auto loss = mean(abs(generator_forward(g, bound, tape.constant(x))));
    const BoundParameters<float>* b[] = {&bound};
    ModelParameters<float>* t[] = {&g.params};
    compute_gradients<float>(tape, loss, b, t);
  }
}
BENCHMARK(BM_GeneratorBackward);

void BM_CriticGradientPenalty(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto critic = build_critic<float>(CriticConfig::desk(), rng);
  const auto x = random_tensor({1, kMcepDims, 128}, rng);
  for (auto _ : state) {
    Tape<float> tape;
    BoundParameters<float> bound(tape, critic.params, true);
    auto in = tape.leaf(x, true);
    auto score = critic_forward(critic, bound, in);
    const std::vector<Var<float>> wrt{in};
    auto grad = tape.gradient(score, wrt, true)[0];
    auto penalty = square(add_scalar(l2_norm(grad), -1.0f));
    benchmark::DoNotOptimize(tape.backward(penalty, bound.vars()));
  }
}
BENCHMARK(BM_CriticGradientPenalty);

void BM_TrainStep(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  NormalizationStats stats;
  stats.mean.assign(kMcepDims, 0.0);
  stats.std.assign(kMcepDims, 1.0);
  auto trainer = init_trainer(GeneratorConfig::desk(), CriticConfig::desk(),
                              ClassifierConfig::desk(), 6, stats);
  TrainingConfig config;
  config.batch_size = batch;
  std::mt19937_64 rng(7);
  std::vector<Segment> bx, by;
  for (int i = 0; i < batch; ++i) {
    bx.push_back({random_tensor({kMcepDims, 128}, rng), i % 4});
    by.push_back({random_tensor({kMcepDims, 128}, rng), (i + 1) % 4});
  }
  for (auto _ : state) benchmark::DoNotOptimize(train_step(trainer, bx, by, config));
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_FrechetDistance(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 1);
  auto draw = [&] {
    std::vector<std::vector<double>> rows(4 * d, std::vector<double>(d));
    for (auto& r : rows) for (auto& v : r) v = n(rng);
    return fit_gaussian(rows);
  };
  const auto a = draw(), b = draw();
  for (auto _ : state) benchmark::DoNotOptimize(frechet_distance(a, b));
}
BENCHMARK(BM_FrechetDistance)->Arg(24)->Arg(64)->Arg(128);

}  // namespace
}  // namespace emotrans

BENCHMARK_MAIN();
