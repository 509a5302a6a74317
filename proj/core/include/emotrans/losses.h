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

#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "emotrans/networks.h"
#include "emotrans/tape.h"

namespace emotrans {

/// Weights of the auxiliary terms in the generator objective.
struct LossWeights {
  double lambda_cyc = 10.0;
  double lambda_li = 5.0;
  double lambda_sv = 1.0;
  double lambda_gradient = 5.0;

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

enum class AdversarialKind {
  kGan,       // sigmoid critic, log loss
  kWganGp,    // Wasserstein critic with gradient penalty
  kWganClip,  // Wasserstein critic with weight clipping
};

struct AdversarialMode {
  AdversarialKind kind = AdversarialKind::kWganGp;
  double clip = 0.01;  // used by kWganClip only

  void validate() const;
  friend bool operator==(const AdversarialMode&, const AdversarialMode&) = default;
};

std::string_view to_string(AdversarialKind kind);
AdversarialKind parse_adversarial_kind(std::string_view name);

/// Which auxiliary generator terms are active.
struct AblationFlags {
  bool use_cycle = true;
  bool use_li = true;
  bool use_sv = true;

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

template <typename Real>
using Batch = std::vector<Var<Real>>;

/// Mean of a batch of one-element vars.
template <typename Real>
Var<Real> batch_mean(const Batch<Real>& values);

template <typename Real>
struct AdversarialLosses {
  Var<Real> critic;
  Var<Real> generator;
};

/// Log loss on critic outputs in (0, 1):
///   critic    = -mean log D(y) - mean log(1 - D(G(x)))
///   generator = -mean log D(G(x))            (non-saturating form)
/// Outputs outside the open interval raise ContractError.
template <typename Real>
AdversarialLosses<Real> adv_loss_gan(const Batch<Real>& real_probs, const Batch<Real>& fake_probs);

/// The same losses from pre-sigmoid critic outputs, via softplus; stable for
/// saturated critics and used by the trainer.
template <typename Real>
AdversarialLosses<Real> adv_loss_gan_logits(const Batch<Real>& real_logits,
                                            const Batch<Real>& fake_logits);

/// Critic evaluated on the tape of its argument.
template <typename Real>
using CriticFn = std::function<Var<Real>(const Var<Real>& input)>;

/// (||grad_x D(x)||_2 - 1)^2 at `point`, recorded with create_graph so the
/// result differentiates with respect to the critic's parameters.
template <typename Real>
Var<Real> gradient_penalty(const CriticFn<Real>& critic, Tape<Real>& tape,
                           const Tensor<Real>& point);

template <typename Real>
struct WganGpLosses {
  Var<Real> critic;     // mean D(fake) - mean D(real) + lambda * penalty
  Var<Real> generator;  // -mean D(fake)
  Var<Real> penalty;    // unweighted mean penalty
};

/// Wasserstein losses with gradient penalty at x_hat = e * real + (1 - e) * fake,
/// e ~ U(0, 1) drawn per sample from `rng`. Real and fake batches are
/// detached for the penalty, so it only depends on the critic.
template <typename Real>
WganGpLosses<Real> adv_loss_wgan_gp(const CriticFn<Real>& critic, const Batch<Real>& real,
                                    const Batch<Real>& fake, Real lambda_gradient,
                                    std::mt19937_64& rng);

/// Wasserstein losses without penalty (weight-clipping mode).
template <typename Real>
AdversarialLosses<Real> adv_loss_wgan(const Batch<Real>& real_scores,
                                      const Batch<Real>& fake_scores);

/// mean|x_cycled - x| + mean|y_cycled - y|, each averaged over the batch.
template <typename Real>
Var<Real> cycle_loss(const Batch<Real>& x, const Batch<Real>& x_cycled, const Batch<Real>& y,
                     const Batch<Real>& y_cycled);

/// mean|mapped_x - x| + mean|mapped_y - y|. The trainer feeds target-domain
/// samples to each generator (identity mapping); see TrainingConfig::li_as_printed.
template <typename Real>
Var<Real> linguistic_loss(const Batch<Real>& x, const Batch<Real>& mapped_x, const Batch<Real>& y,
                          const Batch<Real>& mapped_y);

template <typename Real>
struct SpeakerLoss {
  Var<Real> value;
  std::size_t clamped = 0;  // samples whose true-class probability hit the floor
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Batch mean of -log p[label], probabilities floored at 1e-12.
template <typename Real>
SpeakerLoss<Real> speaker_loss(const Batch<Real>& probs, const std::vector<int>& labels);

template <typename Real>
struct GeneratorTerms {
  Var<Real> adv_xy;  // adversarial term of G_{X->Y}
  Var<Real> adv_yx;  // adversarial term of G_{Y->X}
  Var<Real> cycle;
  Var<Real> linguistic;
  Var<Real> speaker;
};

/// adv_xy + adv_yx + l_cyc * cycle + l_li * linguistic + l_sv * speaker, with
/// disabled terms left out entirely.
template <typename Real>
Var<Real> full_objective(const GeneratorTerms<Real>& terms, const LossWeights& weights,
                         const AblationFlags& flags);

/// Clamps every parameter into [-c, c] in place.
template <typename Real>
void weight_clip(ModelParameters<Real>& params, double c);

}  // namespace emotrans
