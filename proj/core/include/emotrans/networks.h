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
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "emotrans/ops.h"
#include "emotrans/tape.h"

namespace emotrans {

enum class NetworkKind { kGeneratorXY, kGeneratorYX, kCriticX, kCriticY, kClassifier };

/// "generator_xy", "critic_x", ... as used in checkpoints.
std::string_view to_string(NetworkKind kind);
NetworkKind parse_network_kind(std::string_view name);
/// Dotted-name prefix of the parameters of a network ("gen_xy", "critic_y", ...).
std::string_view parameter_prefix(NetworkKind kind);

/// Insertion-ordered, uniquely named parameter set of one network.
template <typename Real>
class ModelParameters {
 public:
  explicit ModelParameters(NetworkKind kind = NetworkKind::kGeneratorXY) : kind_(kind) {}

  NetworkKind kind() const { return kind_; }

  Parameter<Real>& add(std::string name, Tensor<Real> value);
  bool contains(std::string_view name) const;
  Parameter<Real>& at(std::string_view name);
  const Parameter<Real>& at(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;
  Parameter<Real>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<Real>& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();

  template <typename Other>
  ModelParameters<Other> cast() const {
    ModelParameters<Other> out(kind_);
    for (const auto& p : params_) out.add(p.name, p.value.template cast<Other>());
    return out;
  }

 private:
  NetworkKind kind_;
  std::vector<Parameter<Real>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parameters of one network registered as leaves on a tape.
template <typename Real>
class BoundParameters {
 public:
  BoundParameters(Tape<Real>& tape, const ModelParameters<Real>& params, bool trainable);
  /// Uses caller-made vars, one per parameter in order (gradient checks
  /// perturb parameters through these).
  BoundParameters(const ModelParameters<Real>& params, std::vector<Var<Real>> vars);

  const Var<Real>& operator[](std::string_view name) const;
  std::span<const Var<Real>> vars() const { return vars_; }
  const ModelParameters<Real>& params() const { return *params_; }

 private:
  const ModelParameters<Real>* params_;
  std::vector<Var<Real>> vars_;
};

/// Runs the reverse sweep from `loss` and stores d loss / d p into `grad` of
/// every parameter of every listed network (replacing previous gradients).
template <typename Real>
void compute_gradients(Tape<Real>& tape, const Var<Real>& loss,
                       std::span<const BoundParameters<Real>* const> bound,
                       std::span<ModelParameters<Real>* const> targets);

// ---------------------------------------------------------------------------
// Generator: gated 1-D CNN over [24, T] with MCEP dims as channels.

struct GeneratorConfig {
  std::size_t base_channels = 64;
  std::size_t n_residual = 6;
  std::size_t kernel_initial = 15;
  std::size_t kernel_down = 5;
  std::size_t kernel_res = 3;
  std::size_t upsample_factor = 2;

  static GeneratorConfig desk() {
    GeneratorConfig c;
    c.base_channels = 16;
    return c;
  }
  void validate() const;
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

template <typename Real>
struct Generator {
  GeneratorConfig config;
  ModelParameters<Real> params;
};

/// Zero-mean Gaussian conv weights with std sqrt(2 / fan_in), zero biases,
/// unit gamma and zero beta. Depends only on (config, rng state).
template <typename Real>
Generator<Real> build_generator(const GeneratorConfig& config, std::mt19937_64& rng,
                                NetworkKind kind = NetworkKind::kGeneratorXY);

/// [24, T] -> [24, T]; T must be a multiple of 4 (two stride-2 stages).
template <typename Real>
Var<Real> generator_forward(const Generator<Real>& generator, const BoundParameters<Real>& bound,
                            const Var<Real>& input);

/// Inference on any length >= 1: pads time by edge replication to a multiple
/// of 4, runs the generator, and crops back to the input length.
template <typename Real>
Tensor<Real> generator_apply(const Generator<Real>& generator, const Tensor<Real>& input);

// ---------------------------------------------------------------------------
// Critic: 2-D CNN over [1, 24, T] spectral textures, unbounded scalar output.

struct CriticConfig {
  std::size_t base_channels = 32;
  std::size_t n_layers = 4;
  std::size_t kernel = 3;
  std::size_t stride_h = 2;
  std::size_t stride_w = 2;

  static CriticConfig desk() {
    CriticConfig c;
    c.base_channels = 8;
    return c;
  }
  void validate() const;
  friend bool operator==(const CriticConfig&, const CriticConfig&) = default;
};

template <typename Real>
struct Critic {
  CriticConfig config;
  ModelParameters<Real> params;
};

template <typename Real>
Critic<Real> build_critic(const CriticConfig& config, std::mt19937_64& rng,
                          NetworkKind kind = NetworkKind::kCriticY);

/// Conv2d + GLU stack (instance norm from the second layer on), global mean
/// over the remaining grid, linear head. Returns a one-element var.
template <typename Real>
Var<Real> critic_forward(const Critic<Real>& critic, const BoundParameters<Real>& bound,
                         const Var<Real>& input);

template <typename Real>
Real critic_apply(const Critic<Real>& critic, const Tensor<Real>& input);

// ---------------------------------------------------------------------------
// Speaker classifier: VGG-style conv stack with a bottleneck embedding.

struct ClassifierConfig {
  std::size_t n_speakers = 4;
  std::size_t embedding_dim = 64;
  std::size_t depth = 4;
  std::size_t base_channels = 16;

  static ClassifierConfig desk(std::size_t n_speakers = 4) {
    ClassifierConfig c;
    c.n_speakers = n_speakers;
    c.base_channels = 8;
    return c;
  }
  void validate() const;
  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

template <typename Real>
struct Classifier {
  ClassifierConfig config;
  ModelParameters<Real> params;
};

template <typename Real>
struct ClassifierOutput {
  Var<Real> logits;     // [K]
  Var<Real> probs;      // [K], softmax of logits
  Var<Real> embedding;  // [embedding_dim], bottleneck activation
};

/// Name prefix of the final (speaker-count dependent) layer.
inline constexpr std::string_view kClassifierHeadPrefix = "classifier.head.";

template <typename Real>
Classifier<Real> build_classifier(const ClassifierConfig& config, std::mt19937_64& rng);

/// Freshly initialized head for `n_speakers` classes; the rest of `classifier`
/// is kept.
template <typename Real>
void reset_classifier_head(Classifier<Real>& classifier, std::size_t n_speakers,
                           std::mt19937_64& rng);

template <typename Real>
ClassifierOutput<Real> classifier_forward(const Classifier<Real>& classifier,
                                          const BoundParameters<Real>& bound,
                                          const Var<Real>& input);

template <typename Real>
struct ClassifierResult {
  Tensor<Real> probs;
  Tensor<Real> embedding;
};

template <typename Real>
ClassifierResult<Real> classifier_apply(const Classifier<Real>& classifier,
                                        const Tensor<Real>& input);

}  // namespace emotrans
