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

#include "emotrans/networks.h"

#include <cmath>
#include <string>

#include "emotrans/features.h"

namespace emotrans {
namespace {

constexpr double kInstanceNormEpsilon = 1e-9;

template <typename Real>
Tensor<Real> he_normal(const Shape& shape, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor<Real> t(shape);
  for (auto& v : t.data()) v = static_cast<Real>(normal(rng));
  return t;
}

template <typename Real>
void add_conv1d(ModelParameters<Real>& p, const std::string& name, std::size_t out,
                std::size_t in, std::size_t kernel, std::mt19937_64& rng) {
  p.add(name + ".weight", he_normal<Real>({out, in, kernel}, in * kernel, rng));
  p.add(name + ".bias", Tensor<Real>(Shape{out}));
}

template <typename Real>
void add_conv2d(ModelParameters<Real>& p, const std::string& name, std::size_t out,
                std::size_t in, std::size_t kernel, std::mt19937_64& rng) {
  p.add(name + ".weight", he_normal<Real>({out, in, kernel, kernel}, in * kernel * kernel, rng));
  p.add(name + ".bias", Tensor<Real>(Shape{out}));
}

template <typename Real>
void add_linear(ModelParameters<Real>& p, const std::string& name, std::size_t in,
                std::size_t out, std::mt19937_64& rng) {
  p.add(name + ".weight", he_normal<Real>({in, out}, in, rng));
  p.add(name + ".bias", Tensor<Real>(Shape{1, out}));
}

template <typename Real>
void add_norm(ModelParameters<Real>& p, const std::string& name, std::size_t channels) {
  p.add(name + ".gamma", Tensor<Real>(Shape{channels}, Real(1)));
  p.add(name + ".beta", Tensor<Real>(Shape{channels}));
}

template <typename Real>
class Layers {
 public:
  Layers(const BoundParameters<Real>& bound, std::string prefix)
      : bound_(bound), prefix_(std::move(prefix)) {}

  Var<Real> conv1d(const std::string& name, const Var<Real>& x, std::size_t stride,
                   std::size_t padding) const {
    return bias_add(emotrans::conv1d(x, get(name + ".weight"), stride, padding),
                    get(name + ".bias"));
  }
  Var<Real> conv2d(const std::string& name, const Var<Real>& x, Conv2dGeometry g) const {
    return bias_add(emotrans::conv2d(x, get(name + ".weight"), g), get(name + ".bias"));
  }
  Var<Real> norm(const std::string& name, const Var<Real>& x) const {
    return instance_norm(x, get(name + ".gamma"), get(name + ".beta"),
                         static_cast<Real>(kInstanceNormEpsilon));
  }
  Var<Real> linear(const std::string& name, const Var<Real>& x) const {
    return emotrans::linear(x, get(name + ".weight"), get(name + ".bias"));
  }

 private:
  const Var<Real>& get(const std::string& name) const { return bound_[prefix_ + "." + name]; }

  const BoundParameters<Real>& bound_;
  std::string prefix_;
};

}  // namespace

std::string_view to_string(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::kGeneratorXY: return "generator_xy";
    case NetworkKind::kGeneratorYX: return "generator_yx";
    case NetworkKind::kCriticX: return "critic_x";
    case NetworkKind::kCriticY: return "critic_y";
    case NetworkKind::kClassifier: return "classifier";
  }
  return "generator_xy";
}

NetworkKind parse_network_kind(std::string_view name) {
  for (auto k : {NetworkKind::kGeneratorXY, NetworkKind::kGeneratorYX, NetworkKind::kCriticX,
                 NetworkKind::kCriticY, NetworkKind::kClassifier}) {
    if (to_string(k) == name) return k;
  }
  throw FormatError("unknown network kind '" + std::string(name) + "'");
}

std::string_view parameter_prefix(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::kGeneratorXY: return "gen_xy";
    case NetworkKind::kGeneratorYX: return "gen_yx";
    case NetworkKind::kCriticX: return "critic_x";
    case NetworkKind::kCriticY: return "critic_y";
    case NetworkKind::kClassifier: return "classifier";
  }
  return "gen_xy";
}

template <typename Real>
Parameter<Real>& ModelParameters<Real>::add(std::string name, Tensor<Real> value) {
  if (index_.count(name)) throw ContractError("duplicate parameter name '" + name + "'");
  index_.emplace(name, params_.size());
  params_.push_back(Parameter<Real>{std::move(name), std::move(value), std::nullopt});
  return params_.back();
}

template <typename Real>
bool ModelParameters<Real>::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

template <typename Real>
std::size_t ModelParameters<Real>::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractError("no parameter named '" + std::string(name) + "'");
  return it->second;
}

template <typename Real>
Parameter<Real>& ModelParameters<Real>::at(std::string_view name) {
  return params_[index_of(name)];
}

template <typename Real>
const Parameter<Real>& ModelParameters<Real>::at(std::string_view name) const {
  return params_[index_of(name)];
}

template <typename Real>
std::size_t ModelParameters<Real>::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename Real>
void ModelParameters<Real>::zero_grad() {
  for (auto& p : params_) p.grad.reset();
}

template <typename Real>
BoundParameters<Real>::BoundParameters(Tape<Real>& tape, const ModelParameters<Real>& params,
                                       bool trainable)
    : params_(&params) {
  vars_.reserve(params.size());
  for (const auto& p : params) vars_.push_back(tape.leaf(p.value, trainable));
}

template <typename Real>
BoundParameters<Real>::BoundParameters(const ModelParameters<Real>& params,
                                       std::vector<Var<Real>> vars)
    : params_(&params), vars_(std::move(vars)) {
  if (vars_.size() != params.size()) {
    throw ContractError("BoundParameters: " + std::to_string(vars_.size()) + " vars for " +
                        std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i].shape() != params[i].value.shape()) {
      throw DimensionError("BoundParameters: var for " + params[i].name + " has shape " +
                           shape_to_string(vars_[i].shape()));
    }
  }
}

template <typename Real>
const Var<Real>& BoundParameters<Real>::operator[](std::string_view name) const {
  return vars_[params_->index_of(name)];
}

template <typename Real>
void compute_gradients(Tape<Real>& tape, const Var<Real>& loss,
                       std::span<const BoundParameters<Real>* const> bound,
                       std::span<ModelParameters<Real>* const> targets) {
  if (bound.size() != targets.size()) {
    throw ContractError("compute_gradients: bound/target lists differ in length");
  }
  std::vector<Var<Real>> leaves;
  for (const auto* b : bound) leaves.insert(leaves.end(), b->vars().begin(), b->vars().end());
  std::vector<Tensor<Real>> grads = tape.backward(loss, leaves);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    auto& params = *targets[i];
    if (params.size() != bound[i]->vars().size()) {
      throw ContractError("compute_gradients: parameter set does not match its binding");
    }
    for (std::size_t j = 0; j < params.size(); ++j) params[j].grad = std::move(grads[offset + j]);
    offset += params.size();
  }
}

// ---------------------------------------------------------------------------

void GeneratorConfig::validate() const {
  if (n_residual < 1) throw ContractError("generator needs at least one residual block");
  if (base_channels == 0) throw ContractError("generator base_channels must be positive");
  if (kernel_initial % 2 == 0 || kernel_down % 2 == 0 || kernel_res % 2 == 0) {
    throw ContractError("generator kernel sizes must be odd");
  }
  if (upsample_factor != 2) throw ContractError("generator upsample_factor must be 2");
}

template <typename Real>
Generator<Real> build_generator(const GeneratorConfig& config, std::mt19937_64& rng,
                                NetworkKind kind) {
  config.validate();
  const std::string prefix(parameter_prefix(kind));
  const std::size_t c = config.base_channels;
  const std::size_t r = config.upsample_factor;
  const std::size_t res = 4 * c;
  Generator<Real> g{config, ModelParameters<Real>(kind)};
  auto& p = g.params;

  add_conv1d(p, prefix + ".init.conv", 2 * c, kMcepDims, config.kernel_initial, rng);
  add_conv1d(p, prefix + ".down1.conv", 4 * c, c, config.kernel_down, rng);
  add_norm(p, prefix + ".down1.norm", 4 * c);
  add_conv1d(p, prefix + ".down2.conv", 8 * c, 2 * c, config.kernel_down, rng);
  add_norm(p, prefix + ".down2.norm", 8 * c);
  for (std::size_t i = 1; i <= config.n_residual; ++i) {
    const std::string block = prefix + ".res" + std::to_string(i);
    add_conv1d(p, block + ".conv1", 2 * res, res, config.kernel_res, rng);
    add_norm(p, block + ".norm1", 2 * res);
    add_conv1d(p, block + ".conv2", res, res, config.kernel_res, rng);
    add_norm(p, block + ".norm2", res);
  }
  // Each upsample stage ends in GLU, so the shuffled tensor carries twice the
  // target channel count.
  add_conv1d(p, prefix + ".up1.conv", 2 * r * (2 * c), res, config.kernel_down, rng);
  add_norm(p, prefix + ".up1.norm", 2 * (2 * c));
  add_conv1d(p, prefix + ".up2.conv", 2 * r * c, 2 * c, config.kernel_down, rng);
  add_norm(p, prefix + ".up2.norm", 2 * c);
  add_conv1d(p, prefix + ".out.conv", kMcepDims, c, config.kernel_initial, rng);
  return g;
}

template <typename Real>
Var<Real> generator_forward(const Generator<Real>& generator, const BoundParameters<Real>& bound,
                            const Var<Real>& input) {
  const auto& config = generator.config;
  const Shape& shape = input.shape();
  if (shape.size() != 2 || shape[0] != kMcepDims) {
    throw DimensionError("generator input must be [24, T], got " + shape_to_string(shape));
  }
  if (shape[1] % 4 != 0) {
    throw DimensionError("generator time axis (" + std::to_string(shape[1]) +
                         ") must be a multiple of 4");
  }
  Layers<Real> L(bound, std::string(parameter_prefix(generator.params.kind())));
  const std::size_t k0 = config.kernel_initial / 2;
  const std::size_t kd = config.kernel_down / 2;
  const std::size_t kr = config.kernel_res / 2;

  Var<Real> h = glu(L.conv1d("init.conv", input, 1, k0));
  h = glu(L.norm("down1.norm", L.conv1d("down1.conv", h, 2, kd)));
  h = glu(L.norm("down2.norm", L.conv1d("down2.conv", h, 2, kd)));
  for (std::size_t i = 1; i <= config.n_residual; ++i) {
    const std::string block = "res" + std::to_string(i);
    Var<Real> y = glu(L.norm(block + ".norm1", L.conv1d(block + ".conv1", h, 1, kr)));
    y = L.norm(block + ".norm2", L.conv1d(block + ".conv2", y, 1, kr));
    h = add(h, y);
  }
  const std::size_t r = config.upsample_factor;
  h = glu(L.norm("up1.norm", pixel_shuffle_1d(L.conv1d("up1.conv", h, 1, kd), r)));
  h = glu(L.norm("up2.norm", pixel_shuffle_1d(L.conv1d("up2.conv", h, 1, kd), r)));
  return L.conv1d("out.conv", h, 1, k0);
}

template <typename Real>
Tensor<Real> generator_apply(const Generator<Real>& generator, const Tensor<Real>& input) {
  if (input.rank() != 2 || input.dim(0) != kMcepDims) {
    throw DimensionError("generator input must be [24, T], got " + shape_to_string(input.shape()));
  }
  const std::size_t frames = input.dim(1);
  const std::size_t padded = (frames + 3) / 4 * 4;
  Tensor<Real> x(Shape{kMcepDims, padded});
  for (std::size_t d = 0; d < kMcepDims; ++d) {
    for (std::size_t t = 0; t < padded; ++t) {
      x[d * padded + t] = input[d * frames + std::min(t, frames - 1)];
    }
  }
  Tape<Real> tape;
  GradModeGuard<Real> no_grad(tape, false);
  BoundParameters<Real> bound(tape, generator.params, false);
  const Tensor<Real>& y = generator_forward(generator, bound, tape.constant(std::move(x))).value();
  Tensor<Real> out(Shape{kMcepDims, frames});
  for (std::size_t d = 0; d < kMcepDims; ++d) {
    for (std::size_t t = 0; t < frames; ++t) out[d * frames + t] = y[d * padded + t];
  }
  return out;
}

// ---------------------------------------------------------------------------

void CriticConfig::validate() const {
  if (n_layers < 2) throw ContractError("critic needs at least 2 layers");
  if (base_channels == 0) throw ContractError("critic base_channels must be positive");
  if (kernel % 2 == 0) throw ContractError("critic kernel must be odd");
  if (stride_h == 0 || stride_w == 0) throw ContractError("critic strides must be >= 1");
}

template <typename Real>
Critic<Real> build_critic(const CriticConfig& config, std::mt19937_64& rng, NetworkKind kind) {
  config.validate();
  const std::string prefix(parameter_prefix(kind));
  Critic<Real> critic{config, ModelParameters<Real>(kind)};
  auto& p = critic.params;
  std::size_t in = 1;
  std::size_t out = config.base_channels;
  for (std::size_t i = 1; i <= config.n_layers; ++i) {
    const std::string layer = prefix + ".layer" + std::to_string(i);
    add_conv2d(p, layer + ".conv", 2 * out, in, config.kernel, rng);
    if (i >= 2) add_norm(p, layer + ".norm", 2 * out);
    in = out;
    out *= 2;
  }
  add_linear(p, prefix + ".head", in, 1, rng);
  return critic;
}

template <typename Real>
Var<Real> critic_forward(const Critic<Real>& critic, const BoundParameters<Real>& bound,
                         const Var<Real>& input) {
  const auto& config = critic.config;
  if (input.shape().size() != 3 || input.shape()[0] != 1) {
    throw DimensionError("critic input must be [1, H, W], got " + shape_to_string(input.shape()));
  }
  Layers<Real> L(bound, std::string(parameter_prefix(critic.params.kind())));
  const Conv2dGeometry g{config.stride_h, config.stride_w, config.kernel / 2, config.kernel / 2};
  Var<Real> h = input;
  for (std::size_t i = 1; i <= config.n_layers; ++i) {
    const std::string layer = "layer" + std::to_string(i);
    h = L.conv2d(layer + ".conv", h, g);
    if (i >= 2) h = L.norm(layer + ".norm", h);
    h = glu(h);
  }
  const std::size_t channels = h.shape()[0];
  Var<Real> pooled = reshape(channel_mean(h), Shape{1, channels});
  return reshape(L.linear("head", pooled), Shape{1});
}

template <typename Real>
Real critic_apply(const Critic<Real>& critic, const Tensor<Real>& input) {
  Tape<Real> tape;
  GradModeGuard<Real> no_grad(tape, false);
  BoundParameters<Real> bound(tape, critic.params, false);
  return critic_forward(critic, bound, tape.constant(input)).value()[0];
}

// ---------------------------------------------------------------------------

void ClassifierConfig::validate() const {
  if (n_speakers < 2) throw ContractError("speaker classifier needs at least 2 speakers");
  if (embedding_dim == 0 || depth == 0 || base_channels == 0) {
    throw ContractError("classifier dimensions must be positive");
  }
}

template <typename Real>
Classifier<Real> build_classifier(const ClassifierConfig& config, std::mt19937_64& rng) {
  config.validate();
  Classifier<Real> cls{config, ModelParameters<Real>(NetworkKind::kClassifier)};
  auto& p = cls.params;
  std::size_t in = 1;
  std::size_t out = config.base_channels;
  for (std::size_t i = 1; i <= config.depth; ++i) {
    add_conv2d(p, "classifier.conv" + std::to_string(i), out, in, 3, rng);
    in = out;
    out *= 2;
  }
  add_linear(p, "classifier.embed", in, config.embedding_dim, rng);
  add_linear(p, "classifier.head", config.embedding_dim, config.n_speakers, rng);
  return cls;
}

template <typename Real>
void reset_classifier_head(Classifier<Real>& classifier, std::size_t n_speakers,
                           std::mt19937_64& rng) {
  ClassifierConfig config = classifier.config;
  config.n_speakers = n_speakers;
  config.validate();
  ModelParameters<Real> rebuilt(NetworkKind::kClassifier);
  for (const auto& p : classifier.params) {
    if (p.name.starts_with(kClassifierHeadPrefix)) continue;
    rebuilt.add(p.name, p.value);
  }
  add_linear(rebuilt, "classifier.head", config.embedding_dim, n_speakers, rng);
  classifier.config = config;
  classifier.params = std::move(rebuilt);
}

template <typename Real>
ClassifierOutput<Real> classifier_forward(const Classifier<Real>& classifier,
                                          const BoundParameters<Real>& bound,
                                          const Var<Real>& input) {
  if (input.shape().size() != 3 || input.shape()[0] != 1) {
    throw DimensionError("classifier input must be [1, H, W], got " +
                         shape_to_string(input.shape()));
  }
  Layers<Real> L(bound, "classifier");
  const Conv2dGeometry g{2, 2, 1, 1};
  Var<Real> h = input;
  for (std::size_t i = 1; i <= classifier.config.depth; ++i) {
    h = leaky_relu(L.conv2d("conv" + std::to_string(i), h, g));
  }
  const std::size_t channels = h.shape()[0];
  Var<Real> pooled = reshape(channel_mean(h), Shape{1, channels});
  Var<Real> embedding = leaky_relu(L.linear("embed", pooled));
  Var<Real> logits = reshape(L.linear("head", embedding), Shape{classifier.config.n_speakers});
  return {logits, softmax(logits), reshape(embedding, Shape{classifier.config.embedding_dim})};
}

template <typename Real>
ClassifierResult<Real> classifier_apply(const Classifier<Real>& classifier,
                                        const Tensor<Real>& input) {
  Tape<Real> tape;
  GradModeGuard<Real> no_grad(tape, false);
  BoundParameters<Real> bound(tape, classifier.params, false);
  auto out = classifier_forward(classifier, bound, tape.constant(input));
  return {out.probs.value(), out.embedding.value()};
}

#define EMOTRANS_INSTANTIATE_NETWORKS(Real)                                                    \
  template class ModelParameters<Real>;                                                       \
  template class BoundParameters<Real>;                                                       \
  template void compute_gradients(Tape<Real>&, const Var<Real>&,                              \
                                  std::span<const BoundParameters<Real>* const>,              \
                                  std::span<ModelParameters<Real>* const>);                   \
  template Generator<Real> build_generator(const GeneratorConfig&, std::mt19937_64&,          \
                                           NetworkKind);                                      \
  template Var<Real> generator_forward(const Generator<Real>&, const BoundParameters<Real>&,  \
                                       const Var<Real>&);                                     \
  template Tensor<Real> generator_apply(const Generator<Real>&, const Tensor<Real>&);         \
  template Critic<Real> build_critic(const CriticConfig&, std::mt19937_64&, NetworkKind);     \
  template Var<Real> critic_forward(const Critic<Real>&, const BoundParameters<Real>&,        \
                                    const Var<Real>&);                                        \
  template Real critic_apply(const Critic<Real>&, const Tensor<Real>&);                       \
  template Classifier<Real> build_classifier(const ClassifierConfig&, std::mt19937_64&);      \
  template void reset_classifier_head(Classifier<Real>&, std::size_t, std::mt19937_64&);      \
  template ClassifierOutput<Real> classifier_forward(                                         \
      const Classifier<Real>&, const BoundParameters<Real>&, const Var<Real>&);               \
  template ClassifierResult<Real> classifier_apply(const Classifier<Real>&,                   \
                                                   const Tensor<Real>&);

EMOTRANS_INSTANTIATE_NETWORKS(float)
EMOTRANS_INSTANTIATE_NETWORKS(double)

}  // namespace emotrans
