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

#include "emotrans/losses.h"

#include <algorithm>
#include <string>

#include "emotrans/ops.h"

namespace emotrans {
namespace {

template <typename Real>
void require_batches(const char* what, const Batch<Real>& a, const Batch<Real>& b) {
  if (a.empty() || a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": batch sizes differ or are empty (" +
                         std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].shape() != b[i].shape()) {
      throw DimensionError(std::string(what) + ": sample " + std::to_string(i) + " shape " +
                           shape_to_string(a[i].shape()) + " vs " +
                           shape_to_string(b[i].shape()));
    }
  }
}

template <typename Real>
Var<Real> mean_l1(const Batch<Real>& target, const Batch<Real>& estimate) {
  Batch<Real> per_sample;
  per_sample.reserve(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    per_sample.push_back(mean(abs(sub(estimate[i], target[i]))));
  }
  return batch_mean(per_sample);
}

template <typename Real>
void require_open_unit(const char* what, const Batch<Real>& probs) {
  for (const auto& p : probs) {
    const Real v = p.value()[0];
    if (!(v > Real(0) && v < Real(1))) {
      throw ContractError(std::string(what) + ": critic output " + std::to_string(v) +
                          " outside (0, 1)");
    }
  }
}

}  // namespace

void LossWeights::validate() const {
  if (lambda_cyc < 0 || lambda_li < 0 || lambda_sv < 0 || lambda_gradient < 0) {
    throw ContractError("loss weights must be non-negative");
  }
}

void AdversarialMode::validate() const {
  if (kind == AdversarialKind::kWganClip && !(clip > 0)) {
    throw ContractError("weight clipping bound must be positive");
  }
}

std::string_view to_string(AdversarialKind kind) {
  switch (kind) {
    case AdversarialKind::kGan: return "gan";
    case AdversarialKind::kWganGp: return "wgan_gp";
    case AdversarialKind::kWganClip: return "wgan_clip";
  }
  return "wgan_gp";
}

AdversarialKind parse_adversarial_kind(std::string_view name) {
  for (auto k : {AdversarialKind::kGan, AdversarialKind::kWganGp, AdversarialKind::kWganClip}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown adversarial mode '" + std::string(name) +
                        "' (expected gan, wgan_gp or wgan_clip)");
}

template <typename Real>
Var<Real> batch_mean(const Batch<Real>& values) {
  if (values.empty()) throw ContractError("batch_mean of an empty batch");
  Var<Real> total = reshape(values[0], Shape{1});
  for (std::size_t i = 1; i < values.size(); ++i) total = add(total, reshape(values[i], Shape{1}));
  return values.size() == 1 ? total : scale(total, Real(1) / static_cast<Real>(values.size()));
}

template <typename Real>
AdversarialLosses<Real> adv_loss_gan(const Batch<Real>& real_probs, const Batch<Real>& fake_probs) {
  require_open_unit("adv_loss_gan", real_probs);
  require_open_unit("adv_loss_gan", fake_probs);
  Batch<Real> log_real, log_not_fake, log_fake;
  for (const auto& p : real_probs) log_real.push_back(log(p));
  for (const auto& p : fake_probs) {
    log_not_fake.push_back(log(add_scalar(neg(p), Real(1))));
    log_fake.push_back(log(p));
  }
  return {neg(add(batch_mean(log_real), batch_mean(log_not_fake))), neg(batch_mean(log_fake))};
}

template <typename Real>
AdversarialLosses<Real> adv_loss_gan_logits(const Batch<Real>& real_logits,
                                            const Batch<Real>& fake_logits) {
  // -log sigmoid(z) = softplus(-z), -log(1 - sigmoid(z)) = softplus(z)
  Batch<Real> real_term, fake_term, gen_term;
  for (const auto& z : real_logits) real_term.push_back(softplus(neg(z)));
  for (const auto& z : fake_logits) {
    fake_term.push_back(softplus(z));
    gen_term.push_back(softplus(neg(z)));
  }
  return {add(batch_mean(real_term), batch_mean(fake_term)), batch_mean(gen_term)};
}

template <typename Real>
Var<Real> gradient_penalty(const CriticFn<Real>& critic, Tape<Real>& tape,
                           const Tensor<Real>& point) {
  GradModeGuard<Real> recording(tape, true);
  Var<Real> x_hat = tape.leaf(point, true);
  Var<Real> score = critic(x_hat);
  const Var<Real> grad = tape.gradient(score, std::span<const Var<Real>>(&x_hat, 1), true)[0];
  return square(add_scalar(l2_norm(grad), Real(-1)));
}

template <typename Real>
WganGpLosses<Real> adv_loss_wgan_gp(const CriticFn<Real>& critic, const Batch<Real>& real,
                                    const Batch<Real>& fake, Real lambda_gradient,
                                    std::mt19937_64& rng) {
  require_batches("adv_loss_wgan_gp", real, fake);
  Batch<Real> real_scores, fake_scores, penalties;
  for (const auto& y : real) real_scores.push_back(critic(y));
  for (const auto& f : fake) fake_scores.push_back(critic(f));

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Tape<Real>& tape = real[0].tape();
  for (std::size_t i = 0; i < real.size(); ++i) {
    const Real e = static_cast<Real>(uniform(rng));
    const auto r = real[i].value().data();
    const auto f = fake[i].value().data();
    Tensor<Real> x_hat(real[i].shape());
    for (std::size_t j = 0; j < r.size(); ++j) x_hat[j] = e * r[j] + (Real(1) - e) * f[j];
    penalties.push_back(gradient_penalty(critic, tape, x_hat));
  }
  const auto wgan = adv_loss_wgan(real_scores, fake_scores);
  Var<Real> penalty = batch_mean(penalties);
  return {add(wgan.critic, scale(penalty, lambda_gradient)), wgan.generator, penalty};
}

template <typename Real>
AdversarialLosses<Real> adv_loss_wgan(const Batch<Real>& real_scores,
                                      const Batch<Real>& fake_scores) {
  Var<Real> fake_mean = batch_mean(fake_scores);
  return {sub(fake_mean, batch_mean(real_scores)), neg(fake_mean)};
}

template <typename Real>
Var<Real> cycle_loss(const Batch<Real>& x, const Batch<Real>& x_cycled, const Batch<Real>& y,
                     const Batch<Real>& y_cycled) {
  require_batches("cycle_loss", x, x_cycled);
  require_batches("cycle_loss", y, y_cycled);
  return add(mean_l1(x, x_cycled), mean_l1(y, y_cycled));
}

template <typename Real>
Var<Real> linguistic_loss(const Batch<Real>& x, const Batch<Real>& mapped_x, const Batch<Real>& y,
                          const Batch<Real>& mapped_y) {
  require_batches("linguistic_loss", x, mapped_x);
  require_batches("linguistic_loss", y, mapped_y);
  return add(mean_l1(x, mapped_x), mean_l1(y, mapped_y));
}

template <typename Real>
SpeakerLoss<Real> speaker_loss(const Batch<Real>& probs, const std::vector<int>& labels) {
  if (probs.empty() || probs.size() != labels.size()) {
    throw DimensionError("speaker_loss: " + std::to_string(probs.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
  }
  SpeakerLoss<Real> result;
  Batch<Real> terms;
  const Real floor = static_cast<Real>(kProbabilityFloor);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const std::size_t k = probs[i].value().size();
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw ContractError("speaker_loss: label " + std::to_string(labels[i]) + " outside [0, " +
                          std::to_string(k) + ")");
    }
    Var<Real> p = narrow(probs[i], static_cast<std::size_t>(labels[i]), 1);
    if (p.value()[0] < floor) ++result.clamped;
    terms.push_back(neg(log(clamp_min(p, floor))));
  }
  result.value = batch_mean(terms);
  return result;
}

template <typename Real>
Var<Real> full_objective(const GeneratorTerms<Real>& terms, const LossWeights& weights,
                         const AblationFlags& flags) {
  weights.validate();
  Var<Real> total = add(terms.adv_xy, terms.adv_yx);
  auto add_term = [&](bool enabled, const Var<Real>& term, double lambda, const char* name) {
    if (!enabled) return;
    if (!term.valid()) {
      throw ContractError(std::string("full_objective: enabled term '") + name + "' missing");
    }
    total = add(total, scale(term, static_cast<Real>(lambda)));
  };
  add_term(flags.use_cycle, terms.cycle, weights.lambda_cyc, "cycle");
  add_term(flags.use_li, terms.linguistic, weights.lambda_li, "linguistic");
  add_term(flags.use_sv, terms.speaker, weights.lambda_sv, "speaker");
  return total;
}

template <typename Real>
void weight_clip(ModelParameters<Real>& params, double c) {
  if (!(c > 0)) throw ContractError("weight_clip bound must be positive");
  const Real bound = static_cast<Real>(c);
  for (auto& p : params) {
    for (auto& v : p.value.data()) v = std::clamp(v, -bound, bound);
  }
}

#define EMOTRANS_INSTANTIATE_LOSSES(Real)                                                      \
  template Var<Real> batch_mean(const Batch<Real>&);                                          \
  template AdversarialLosses<Real> adv_loss_gan(const Batch<Real>&, const Batch<Real>&);      \
  template AdversarialLosses<Real> adv_loss_gan_logits(const Batch<Real>&, const Batch<Real>&); \
  template Var<Real> gradient_penalty(const CriticFn<Real>&, Tape<Real>&, const Tensor<Real>&); \
  template WganGpLosses<Real> adv_loss_wgan_gp(const CriticFn<Real>&, const Batch<Real>&,     \
                                               const Batch<Real>&, Real, std::mt19937_64&);   \
  template AdversarialLosses<Real> adv_loss_wgan(const Batch<Real>&, const Batch<Real>&);     \
  template Var<Real> cycle_loss(const Batch<Real>&, const Batch<Real>&, const Batch<Real>&,   \
                                const Batch<Real>&);                                          \
  template Var<Real> linguistic_loss(const Batch<Real>&, const Batch<Real>&,                  \
                                     const Batch<Real>&, const Batch<Real>&);                 \
  template SpeakerLoss<Real> speaker_loss(const Batch<Real>&, const std::vector<int>&);       \
  template Var<Real> full_objective(const GeneratorTerms<Real>&, const LossWeights&,          \
                                    const AblationFlags&);                                    \
  template void weight_clip(ModelParameters<Real>&, double);

EMOTRANS_INSTANTIATE_LOSSES(float)
EMOTRANS_INSTANTIATE_LOSSES(double)

}  // namespace emotrans
