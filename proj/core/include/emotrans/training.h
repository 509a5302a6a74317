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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "emotrans/features.h"
#include "emotrans/losses.h"
#include "emotrans/networks.h"

namespace emotrans {

struct TrainingConfig {
  double lr_generator = 2e-4;
  double lr_critic = 1e-4;
  double lr_classifier = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon_adam = 1e-8;
  int n_critic = 1;
  std::uint64_t iterations = 1000;
  std::uint64_t seed = 0;
  int batch_size = 1;
  std::size_t segment_length = kSegmentFrames;
  LossWeights weights;
  AdversarialMode adversarial;
  AblationFlags ablation;
  // Literal argument order for the linguistic term: G_xy(x) vs x, G_yx(y) vs y.
  bool li_as_printed = false;
  // 0 writes only the final checkpoint.
  std::uint64_t checkpoint_every = 0;

  void validate() const;
  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

struct AdamHyper {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

template <typename Real>
struct AdamState {
  std::vector<Tensor<Real>> m;
  std::vector<Tensor<Real>> v;
  std::uint64_t t = 0;

  static AdamState zeros(const ModelParameters<Real>& params);
};

/// One bias-corrected Adam update from the `grad` fields of `params`.
/// Parameters without a gradient are left untouched (their moments still
/// decay). A non-finite gradient raises NumericError naming the parameter and
/// `iteration` before anything is modified.
template <typename Real>
void adam_step(ModelParameters<Real>& params, AdamState<Real>& state, const AdamHyper& hyper,
               std::uint64_t iteration = 0);

struct Models {
  Generator<float> gen_xy;
  Generator<float> gen_yx;
  Critic<float> critic_x;  // judges domain X
  Critic<float> critic_y;  // judges domain Y
  Classifier<float> classifier;
};

/// Builds all five networks in a fixed order from `rng`.
Models build_models(const GeneratorConfig& generator, const CriticConfig& critic,
                    const ClassifierConfig& classifier, std::mt19937_64& rng);

struct Optimizers {
  AdamState<float> gen_xy, gen_yx, critic_x, critic_y, classifier;

  static Optimizers zeros(const Models& models);
};

/// Everything a run needs to continue: models, optimizer moments, the
/// iteration counter, the sampling stream and the feature normalization.
struct TrainerState {
  Models models;
  Optimizers optimizers;
  std::uint64_t iteration = 0;
  std::mt19937_64 rng;
  NormalizationStats stats;
};

TrainerState init_trainer(const GeneratorConfig& generator, const CriticConfig& critic,
                          const ClassifierConfig& classifier, std::uint64_t seed,
                          NormalizationStats stats);

/// Component values of one iteration. Disabled terms stay empty.
struct LossReport {
  std::uint64_t iteration = 0;
  double loss_adv_g = 0;   // adversarial part of the generator objective, both directions
  double loss_adv_dx = 0;  // critic X loss (penalty included in wgan_gp mode)
  double loss_adv_dy = 0;
  std::optional<double> loss_cyc;
  std::optional<double> loss_li;
  std::optional<double> loss_sv;
  std::optional<double> gp;  // unweighted mean penalty over both critics
  double loss_cls = 0;       // classifier cross-entropy on real samples
  double loss_g_total = 0;
  std::size_t sv_clamped = 0;
  double secs = 0;
};

/// One JSON line: iter, loss_adv_g, loss_adv_dx, loss_adv_dy, loss_cyc,
/// loss_li, loss_sv, gp, loss_cls, secs. Disabled terms are written as 0.
std::string to_json_line(const LossReport& report);

/// A training segment in channels-major layout [24, L] with its speaker.
struct Segment {
  Tensor<float> features;
  int speaker_id = 0;
};

/// Critic updates, a classifier update on real samples, then one joint
/// generator update; increments state.iteration. Any non-finite value
/// raises NumericError naming the component and the iteration.
LossReport train_step(TrainerState& state, const std::vector<Segment>& batch_x,
                      const std::vector<Segment>& batch_y, const TrainingConfig& config);

/// Normalized recordings of both domains.
struct TrainingData {
  std::vector<FeatureMatrix> domain_x;
  std::vector<FeatureMatrix> domain_y;
  NormalizationStats stats;
  std::size_t n_speakers = 0;
};

/// Validates both manifests (an empty one is a ValidationError), loads them
/// and normalizes both domains with statistics fitted on domain X, or with
/// `stats` when given.
TrainingData prepare_training_data(const DatasetManifest& x, const DatasetManifest& y,
                                   std::size_t min_frames = kSegmentFrames,
                                   const std::optional<NormalizationStats>& stats = std::nullopt);

/// Draws batch_size independent (recording, start) pairs per domain.
std::pair<std::vector<Segment>, std::vector<Segment>> sample_batches(
    const TrainingData& data, const TrainingConfig& config, std::mt19937_64& rng);

struct LoopHooks {
  std::ostream* metrics = nullptr;
  /// false writes secs = 0 so two logs of the same run compare byte for byte.
  bool wall_time = true;
  /// Called after every iteration; returning false stops the loop.
  std::function<bool(const TrainerState&, const LossReport&)> on_iteration;
  /// Called every checkpoint_every iterations and at the end.
  std::function<void(const TrainerState&)> on_checkpoint;
};

/// Runs from state.iteration up to config.iterations. Returns the reports of
/// the iterations run.
std::vector<LossReport> train_loop(TrainerState& state, const TrainingData& data,
                                   const TrainingConfig& config, const LoopHooks& hooks = {});

/// True for parameters carried over by transfer_init.
bool is_migrated_parameter(std::string_view name);

/// Target-side topology and seed for transfer_init.
struct TransferPlan {
  std::filesystem::path source_checkpoint;
  GeneratorConfig generator;
  CriticConfig critic;
  ClassifierConfig classifier;  // n_speakers of the target data
  std::uint64_t seed = 0;
  std::uint64_t fine_tune_iterations = 0;
};

/// Fresh target models with every migrated parameter copied bit-for-bit from
/// `source`, a freshly initialized classifier head, zeroed optimizers and
/// iteration 0. A missing or differently shaped parameter outside the head
/// raises ValidationError naming it.
TrainerState transfer_init(const Models& source, const TransferPlan& plan,
                           NormalizationStats target_stats);

}  // namespace emotrans
