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

#include "emotrans/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

#include "emotrans/errors.h"
#include "emotrans/ops.h"

namespace emotrans {
namespace {

Tensor<float> as_image(const Tensor<float>& channels_major) {
  return channels_major.reshaped(Shape{1, channels_major.dim(0), channels_major.dim(1)});
}

void require_finite(const char* component, double value, std::uint64_t iteration) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string(component) + " is non-finite at iteration " +
                       std::to_string(iteration));
  }
}

double item(const Var<float>& v) { return static_cast<double>(v.value()[0]); }

AdamHyper hyper(const TrainingConfig& c, double lr) { return {lr, c.beta1, c.beta2, c.epsilon_adam}; }

// Adversarial term of one generator given the critic's scores on its outputs.
Var<float> generator_adversarial(AdversarialKind kind, const Batch<float>& fake_scores) {
  if (kind == AdversarialKind::kGan) {
    Batch<float> terms;
    for (const auto& z : fake_scores) terms.push_back(softplus(neg(z)));
    return batch_mean(terms);
  }
  return neg(batch_mean(fake_scores));
}

struct CriticLoss {
  Var<float> loss;
  std::optional<Var<float>> penalty;
};

CriticLoss critic_loss(const Critic<float>& critic, const BoundParameters<float>& bound,
                       const Batch<float>& real, const Batch<float>& fake,
                       const TrainingConfig& config, std::mt19937_64& rng) {
  CriticFn<float> fn = [&](const Var<float>& in) { return critic_forward(critic, bound, in); };
  if (config.adversarial.kind == AdversarialKind::kWganGp) {
    auto l = adv_loss_wgan_gp(fn, real, fake, static_cast<float>(config.weights.lambda_gradient),
                              rng);
    return {l.critic, l.penalty};
  }
  Batch<float> real_scores, fake_scores;
  for (const auto& r : real) real_scores.push_back(fn(r));
  for (const auto& f : fake) fake_scores.push_back(fn(f));
  if (config.adversarial.kind == AdversarialKind::kGan) {
    return {adv_loss_gan_logits(real_scores, fake_scores).critic, std::nullopt};
  }
  return {adv_loss_wgan(real_scores, fake_scores).critic, std::nullopt};
}

}  // namespace

void TrainingConfig::validate() const {
  if (!(lr_generator > 0) || !(lr_critic > 0) || !(lr_classifier > 0)) {
    throw ValidationError("learning rates must be positive");
  }
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw ValidationError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon_adam > 0)) throw ValidationError("epsilon_adam must be positive");
  if (n_critic < 1) throw ValidationError("n_critic must be at least 1");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (segment_length == 0 || segment_length % 4 != 0) {
    throw ValidationError("segment_length must be a positive multiple of 4");
  }
  try {
    weights.validate();
    adversarial.validate();
  } catch (const ContractError& e) {
    throw ValidationError(e.what());
  }
}

template <typename Real>
AdamState<Real> AdamState<Real>::zeros(const ModelParameters<Real>& params) {
  AdamState<Real> s;
  for (const auto& p : params) {
    s.m.emplace_back(p.value.shape());
    s.v.emplace_back(p.value.shape());
  }
  return s;
}

template <typename Real>
void adam_step(ModelParameters<Real>& params, AdamState<Real>& state, const AdamHyper& hyper,
               std::uint64_t iteration) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: optimizer state does not match the parameter set");
  }
  for (const auto& p : params) {
    if (p.grad && !p.grad->all_finite()) {
      throw NumericError("non-finite gradient for " + p.name + " at iteration " +
                         std::to_string(iteration));
    }
    if (p.grad && p.grad->shape() != p.value.shape()) {
      throw DimensionError("gradient shape of " + p.name + " is " +
                           shape_to_string(p.grad->shape()) + ", expected " +
                           shape_to_string(p.value.shape()));
    }
  }
  state.t += 1;
  const double b1 = hyper.beta1;
  const double b2 = hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    auto theta = p.value.data();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double g = p.grad ? static_cast<double>((*p.grad)[j]) : 0.0;
      const double mj = b1 * m[j] + (1.0 - b1) * g;
      const double vj = b2 * v[j] + (1.0 - b2) * g * g;
      m[j] = static_cast<Real>(mj);
      v[j] = static_cast<Real>(vj);
      const double step = hyper.lr * (mj / c1) / (std::sqrt(vj / c2) + hyper.epsilon);
      theta[j] = static_cast<Real>(static_cast<double>(theta[j]) - step);
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(ModelParameters<float>&, AdamState<float>&, const AdamHyper&,
                        std::uint64_t);
template void adam_step(ModelParameters<double>&, AdamState<double>&, const AdamHyper&,
                        std::uint64_t);

Models build_models(const GeneratorConfig& generator, const CriticConfig& critic,
                    const ClassifierConfig& classifier, std::mt19937_64& rng) {
  Models m{
      build_generator<float>(generator, rng, NetworkKind::kGeneratorXY),
      build_generator<float>(generator, rng, NetworkKind::kGeneratorYX),
      build_critic<float>(critic, rng, NetworkKind::kCriticX),
      build_critic<float>(critic, rng, NetworkKind::kCriticY),
      build_classifier<float>(classifier, rng),
  };
  return m;
}

Optimizers Optimizers::zeros(const Models& models) {
  return {AdamState<float>::zeros(models.gen_xy.params),
          AdamState<float>::zeros(models.gen_yx.params),
          AdamState<float>::zeros(models.critic_x.params),
          AdamState<float>::zeros(models.critic_y.params),
          AdamState<float>::zeros(models.classifier.params)};
}

TrainerState init_trainer(const GeneratorConfig& generator, const CriticConfig& critic,
                          const ClassifierConfig& classifier, std::uint64_t seed,
                          NormalizationStats stats) {
  std::mt19937_64 rng(seed);
  Models models = build_models(generator, critic, classifier, rng);
  Optimizers opt = Optimizers::zeros(models);
  return TrainerState{std::move(models), std::move(opt), 0, rng, std::move(stats)};
}

std::string to_json_line(const LossReport& r) {
  nlohmann::ordered_json j;
  j["iter"] = r.iteration;
  j["loss_adv_g"] = r.loss_adv_g;
  j["loss_adv_dx"] = r.loss_adv_dx;
  j["loss_adv_dy"] = r.loss_adv_dy;
  j["loss_cyc"] = r.loss_cyc.value_or(0.0);
  j["loss_li"] = r.loss_li.value_or(0.0);
  j["loss_sv"] = r.loss_sv.value_or(0.0);
  j["gp"] = r.gp.value_or(0.0);
  j["loss_cls"] = r.loss_cls;
  j["secs"] = r.secs;
  return j.dump();
}

LossReport train_step(TrainerState& state, const std::vector<Segment>& batch_x,
                      const std::vector<Segment>& batch_y, const TrainingConfig& config) {
  if (batch_x.empty() || batch_x.size() != batch_y.size()) {
    throw DimensionError("train_step: batches must be non-empty and of equal size");
  }
  const std::uint64_t iteration = state.iteration + 1;
  Models& m = state.models;
  LossReport report;
  report.iteration = iteration;
  try {
    // (1) critics, generators frozen
    std::vector<Tensor<float>> fake_y, fake_x;
    for (const auto& s : batch_x) fake_y.push_back(as_image(generator_apply(m.gen_xy, s.features)));
    for (const auto& s : batch_y) fake_x.push_back(as_image(generator_apply(m.gen_yx, s.features)));
    for (int k = 0; k < config.n_critic; ++k) {
      Tape<float> tape;
      BoundParameters<float> bx(tape, m.critic_x.params, true);
      BoundParameters<float> by(tape, m.critic_y.params, true);
      Batch<float> real_x, real_y, fx, fy;
      for (std::size_t i = 0; i < batch_x.size(); ++i) {
        real_x.push_back(tape.constant(as_image(batch_x[i].features)));
        real_y.push_back(tape.constant(as_image(batch_y[i].features)));
        fx.push_back(tape.constant(fake_x[i]));
        fy.push_back(tape.constant(fake_y[i]));
      }
      CriticLoss lx = critic_loss(m.critic_x, bx, real_x, fx, config, state.rng);
      CriticLoss ly = critic_loss(m.critic_y, by, real_y, fy, config, state.rng);
      report.loss_adv_dx = item(lx.loss);
      report.loss_adv_dy = item(ly.loss);
      require_finite("loss_adv_dx", report.loss_adv_dx, iteration);
      require_finite("loss_adv_dy", report.loss_adv_dy, iteration);
      if (lx.penalty) report.gp = 0.5 * (item(*lx.penalty) + item(*ly.penalty));
      const BoundParameters<float>* bound[] = {&bx, &by};
      ModelParameters<float>* targets[] = {&m.critic_x.params, &m.critic_y.params};
      compute_gradients<float>(tape, add(lx.loss, ly.loss), bound, targets);
      adam_step(m.critic_x.params, state.optimizers.critic_x, hyper(config, config.lr_critic),
                iteration);
      adam_step(m.critic_y.params, state.optimizers.critic_y, hyper(config, config.lr_critic),
                iteration);
      if (config.adversarial.kind == AdversarialKind::kWganClip) {
        weight_clip(m.critic_x.params, config.adversarial.clip);
        weight_clip(m.critic_y.params, config.adversarial.clip);
      }
    }

    // (2) classifier on real samples of both domains
    {
      Tape<float> tape;
      BoundParameters<float> bc(tape, m.classifier.params, true);
      Batch<float> probs;
      std::vector<int> labels;
      for (const auto* batch : {&batch_x, &batch_y}) {
        for (const auto& s : *batch) {
          probs.push_back(
              classifier_forward(m.classifier, bc, tape.constant(as_image(s.features))).probs);
          labels.push_back(s.speaker_id);
        }
      }
      Var<float> loss = speaker_loss(probs, labels).value;
      report.loss_cls = item(loss);
      require_finite("loss_cls", report.loss_cls, iteration);
      const BoundParameters<float>* bound[] = {&bc};
      ModelParameters<float>* targets[] = {&m.classifier.params};
      compute_gradients<float>(tape, loss, bound, targets);
      adam_step(m.classifier.params, state.optimizers.classifier,
                hyper(config, config.lr_classifier), iteration);
    }

    // (3) both generators jointly, critics and classifier frozen
    {
      Tape<float> tape;
      BoundParameters<float> gxy(tape, m.gen_xy.params, true);
      BoundParameters<float> gyx(tape, m.gen_yx.params, true);
      BoundParameters<float> cx(tape, m.critic_x.params, false);
      BoundParameters<float> cy(tape, m.critic_y.params, false);
      BoundParameters<float> cls(tape, m.classifier.params, false);
      auto image = [](const Var<float>& v) {
        return reshape(v, Shape{1, v.shape()[0], v.shape()[1]});
      };

      Batch<float> x, y, fy, fx, score_fy, score_fx;
      for (std::size_t i = 0; i < batch_x.size(); ++i) {
        x.push_back(tape.constant(batch_x[i].features));
        y.push_back(tape.constant(batch_y[i].features));
        fy.push_back(generator_forward(m.gen_xy, gxy, x.back()));
        fx.push_back(generator_forward(m.gen_yx, gyx, y.back()));
        score_fy.push_back(critic_forward(m.critic_y, cy, image(fy.back())));
        score_fx.push_back(critic_forward(m.critic_x, cx, image(fx.back())));
      }
      GeneratorTerms<float> terms;
      terms.adv_xy = generator_adversarial(config.adversarial.kind, score_fy);
      terms.adv_yx = generator_adversarial(config.adversarial.kind, score_fx);
      report.loss_adv_g = item(terms.adv_xy) + item(terms.adv_yx);
      require_finite("loss_adv_g", report.loss_adv_g, iteration);

      const AblationFlags& flags = config.ablation;
      if (flags.use_cycle) {
        Batch<float> xc, yc;
        for (std::size_t i = 0; i < x.size(); ++i) {
          xc.push_back(generator_forward(m.gen_yx, gyx, fy[i]));
          yc.push_back(generator_forward(m.gen_xy, gxy, fx[i]));
        }
        terms.cycle = cycle_loss(x, xc, y, yc);
        report.loss_cyc = item(terms.cycle);
        require_finite("loss_cyc", *report.loss_cyc, iteration);
      }
      if (flags.use_li) {
        Batch<float> mapped_x, mapped_y;
        if (config.li_as_printed) {
          mapped_x = fy;  // G_xy(x)
          mapped_y = fx;  // G_yx(y)
        } else {
          for (std::size_t i = 0; i < x.size(); ++i) {
            mapped_x.push_back(generator_forward(m.gen_yx, gyx, x[i]));
            mapped_y.push_back(generator_forward(m.gen_xy, gxy, y[i]));
          }
        }
        terms.linguistic = linguistic_loss(x, mapped_x, y, mapped_y);
        report.loss_li = item(terms.linguistic);
        require_finite("loss_li", *report.loss_li, iteration);
      }
      if (flags.use_sv) {
        Batch<float> probs;
        std::vector<int> labels;
        for (std::size_t i = 0; i < x.size(); ++i) {
          probs.push_back(classifier_forward(m.classifier, cls, image(fy[i])).probs);
          labels.push_back(batch_x[i].speaker_id);
        }
        for (std::size_t i = 0; i < y.size(); ++i) {
          probs.push_back(classifier_forward(m.classifier, cls, image(fx[i])).probs);
          labels.push_back(batch_y[i].speaker_id);
        }
        auto sv = speaker_loss(probs, labels);
        terms.speaker = sv.value;
        report.loss_sv = item(sv.value);
        report.sv_clamped = sv.clamped;
        require_finite("loss_sv", *report.loss_sv, iteration);
      }
      Var<float> total = full_objective(terms, config.weights, flags);
      report.loss_g_total = item(total);
      require_finite("generator objective", report.loss_g_total, iteration);

      const BoundParameters<float>* bound[] = {&gxy, &gyx};
      ModelParameters<float>* targets[] = {&m.gen_xy.params, &m.gen_yx.params};
      compute_gradients<float>(tape, total, bound, targets);
      adam_step(m.gen_xy.params, state.optimizers.gen_xy, hyper(config, config.lr_generator),
                iteration);
      adam_step(m.gen_yx.params, state.optimizers.gen_yx, hyper(config, config.lr_generator),
                iteration);
    }
  } catch (const NumericError& e) {
    const std::string what = e.what();
    if (what.find("iteration") != std::string::npos) throw;
    throw NumericError(what + " (iteration " + std::to_string(iteration) + ")");
  }
  state.iteration = iteration;
  return report;
}

TrainingData prepare_training_data(const DatasetManifest& x, const DatasetManifest& y,
                                   std::size_t min_frames,
                                   const std::optional<NormalizationStats>& stats) {
  if (x.entries.empty()) throw ValidationError("domain X manifest has no entries");
  if (y.entries.empty()) throw ValidationError("domain Y manifest has no entries");
  validate_manifest(x, min_frames);
  validate_manifest(y, min_frames);
  TrainingData data;
  data.n_speakers = std::max(x.speakers.size(), y.speakers.size());
  auto raw_x = load_corpus(x);
  auto raw_y = load_corpus(y);
  if (stats) {
    data.stats = *stats;
  } else {
    // source domain only; union stats put an untrained generator halfway to Y
    data.stats = fit_normalization(raw_x);
  }
  for (const auto& f : raw_x) data.domain_x.push_back(apply_normalization(f, data.stats));
  for (const auto& f : raw_y) data.domain_y.push_back(apply_normalization(f, data.stats));
  return data;
}

std::pair<std::vector<Segment>, std::vector<Segment>> sample_batches(
    const TrainingData& data, const TrainingConfig& config, std::mt19937_64& rng) {
  auto draw = [&](const std::vector<FeatureMatrix>& domain) {
    std::vector<Segment> batch;
    std::uniform_int_distribution<std::size_t> pick(0, domain.size() - 1);
    for (int b = 0; b < config.batch_size; ++b) {
      const FeatureMatrix& f = domain[pick(rng)];
      FeatureMatrix seg = random_segment(f, config.segment_length, rng);
      batch.push_back({to_channels_major(seg), f.speaker_id});
    }
    return batch;
  };
  auto bx = draw(data.domain_x);
  auto by = draw(data.domain_y);
  return {std::move(bx), std::move(by)};
}

std::vector<LossReport> train_loop(TrainerState& state, const TrainingData& data,
                                   const TrainingConfig& config, const LoopHooks& hooks) {
  config.validate();
  if (data.domain_x.empty() || data.domain_y.empty()) {
    throw ValidationError("training needs recordings in both domains");
  }
  std::vector<LossReport> reports;
  bool stopped = false;
  while (state.iteration < config.iterations && !stopped) {
    const auto start = std::chrono::steady_clock::now();
    auto [bx, by] = sample_batches(data, config, state.rng);
    LossReport r = train_step(state, bx, by, config);
    if (hooks.wall_time) {
      r.secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    if (hooks.metrics) {
      *hooks.metrics << to_json_line(r) << '\n';
      hooks.metrics->flush();
    }
    reports.push_back(r);
    if (hooks.on_iteration && !hooks.on_iteration(state, r)) stopped = true;
    const bool last = stopped || state.iteration >= config.iterations;
    const bool periodic =
        config.checkpoint_every > 0 && state.iteration % config.checkpoint_every == 0;
    if (hooks.on_checkpoint && (periodic || last)) hooks.on_checkpoint(state);
  }
  return reports;
}

bool is_migrated_parameter(std::string_view name) {
  return !name.starts_with(kClassifierHeadPrefix);
}

namespace {

void migrate(const ModelParameters<float>& source, ModelParameters<float>& target) {
  for (auto& p : target) {
    if (!is_migrated_parameter(p.name)) continue;
    if (!source.contains(p.name)) {
      throw ValidationError("transfer: source checkpoint lacks parameter " + p.name);
    }
    const auto& s = source.at(p.name);
    if (s.value.shape() != p.value.shape()) {
      throw ValidationError("transfer: shape mismatch for " + p.name + ": source " +
                            shape_to_string(s.value.shape()) + ", target " +
                            shape_to_string(p.value.shape()));
    }
    p.value = s.value;
  }
  for (const auto& s : source) {
    if (is_migrated_parameter(s.name) && !target.contains(s.name)) {
      throw ValidationError("transfer: target topology has no parameter " + s.name);
    }
  }
}

}  // namespace

TrainerState transfer_init(const Models& source, const TransferPlan& plan,
                           NormalizationStats target_stats) {
  TrainerState state = init_trainer(plan.generator, plan.critic, plan.classifier, plan.seed,
                                    std::move(target_stats));
  Models& t = state.models;
  migrate(source.gen_xy.params, t.gen_xy.params);
  migrate(source.gen_yx.params, t.gen_yx.params);
  migrate(source.critic_x.params, t.critic_x.params);
  migrate(source.critic_y.params, t.critic_y.params);
  migrate(source.classifier.params, t.classifier.params);
  return state;
}

}  // namespace emotrans
