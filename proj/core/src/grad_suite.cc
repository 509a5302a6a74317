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

#include "emotrans/grad_suite.h"

#include <algorithm>
#include <functional>
#include <random>

#include "emotrans/grad_check.h"
#include "emotrans/losses.h"
#include "emotrans/networks.h"
#include "emotrans/ops.h"

namespace emotrans {
namespace {

using V = Var<double>;
using T = Tensor<double>;
using Inputs = std::vector<V>;

constexpr double kOpTolerance = 1e-5;
constexpr double kLossTolerance = 1e-4;
constexpr std::size_t kFrames = 16;

enum class Domain { kAny, kAwayFromZero, kPositive };

T random_tensor(const Shape& shape, std::mt19937_64& rng, Domain domain = Domain::kAny) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  T t(shape);
  for (auto& v : t.data()) {
    switch (domain) {
      case Domain::kAny: v = u(rng); break;
      case Domain::kAwayFromZero:
        do v = u(rng);
        while (std::abs(v) < 1e-3);
        break;
      case Domain::kPositive: v = 0.2 + 0.9 * (u(rng) + 1.0); break;
    }
  }
  return t;
}

// Fixed random weighting turns any output into a scalar that depends on
// every element.
V weighted(Tape<double>& tape, const V& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(out, tape.constant(random_tensor(out.shape(), rng))));
}

struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  std::vector<Domain> domains;  // per input, kAny when shorter
  std::function<V(const Inputs&)> apply;
};

std::vector<OpCase> op_cases() {
  const Conv2dGeometry g{2, 2, 1, 1};
  return {
      {"add", {{3, 4}, {3, 4}}, {}, [](const Inputs& x) { return add(x[0], x[1]); }},
      {"sub", {{3, 4}, {3, 4}}, {}, [](const Inputs& x) { return sub(x[0], x[1]); }},
      {"mul", {{3, 4}, {3, 4}}, {}, [](const Inputs& x) { return mul(x[0], x[1]); }},
      {"div", {{3, 4}, {3, 4}}, {Domain::kAny, Domain::kPositive},
       [](const Inputs& x) { return div(x[0], x[1]); }},
      {"neg", {{5}}, {}, [](const Inputs& x) { return neg(x[0]); }},
      {"scale", {{5}}, {}, [](const Inputs& x) { return scale(x[0], 1.7); }},
      {"add_scalar", {{5}}, {}, [](const Inputs& x) { return add_scalar(x[0], -0.3); }},
      {"square", {{5}}, {}, [](const Inputs& x) { return square(x[0]); }},
      {"sqrt", {{5}}, {Domain::kPositive}, [](const Inputs& x) { return sqrt(x[0]); }},
      {"sigmoid", {{6}}, {}, [](const Inputs& x) { return sigmoid(x[0]); }},
      {"leaky_relu", {{6}}, {Domain::kAwayFromZero},
       [](const Inputs& x) { return leaky_relu(x[0], 0.2); }},
      {"abs", {{6}}, {Domain::kAwayFromZero}, [](const Inputs& x) { return abs(x[0]); }},
      {"log", {{6}}, {Domain::kPositive}, [](const Inputs& x) { return log(x[0]); }},
      {"exp", {{6}}, {}, [](const Inputs& x) { return exp(x[0]); }},
      {"softplus", {{6}}, {}, [](const Inputs& x) { return softplus(x[0]); }},
      {"clamp_min", {{6}}, {Domain::kAwayFromZero},
       [](const Inputs& x) { return clamp_min(x[0], 0.0); }},
      {"sum", {{3, 4}}, {}, [](const Inputs& x) { return sum(x[0]); }},
      {"mean", {{3, 4}}, {}, [](const Inputs& x) { return mean(x[0]); }},
      {"l2_norm", {{3, 4}}, {}, [](const Inputs& x) { return l2_norm(x[0]); }},
      {"channel_sum", {{3, 5}}, {}, [](const Inputs& x) { return channel_sum(x[0]); }},
      {"channel_mean", {{3, 5}}, {}, [](const Inputs& x) { return channel_mean(x[0]); }},
      {"broadcast_channels", {{3}}, {},
       [](const Inputs& x) { return broadcast_channels(x[0], Shape{3, 4}); }},
      {"bias_add", {{3, 4}, {3}}, {}, [](const Inputs& x) { return bias_add(x[0], x[1]); }},
      {"reshape", {{3, 4}}, {}, [](const Inputs& x) { return reshape(x[0], Shape{2, 6}); }},
      {"narrow", {{5, 2}}, {}, [](const Inputs& x) { return narrow(x[0], 1, 3); }},
      {"embed", {{2, 3}}, {}, [](const Inputs& x) { return embed(x[0], 1, 4); }},
      {"transpose", {{3, 4}}, {}, [](const Inputs& x) { return transpose(x[0]); }},
      {"matmul", {{3, 4}, {4, 2}}, {}, [](const Inputs& x) { return matmul(x[0], x[1]); }},
      {"linear", {{1, 4}, {4, 3}, {1, 3}}, {},
       [](const Inputs& x) { return linear(x[0], x[1], x[2]); }},
      {"conv1d", {{3, 10}, {4, 3, 3}}, {}, [](const Inputs& x) { return conv1d(x[0], x[1], 2, 1); }},
      {"conv2d", {{2, 6, 8}, {3, 2, 3, 3}}, {},
       [g](const Inputs& x) { return conv2d(x[0], x[1], g); }},
      {"conv2d_input_grad", {{3, 3, 4}, {3, 2, 3, 3}}, {},
       [g](const Inputs& x) { return conv2d_input_grad(x[0], x[1], Shape{2, 6, 8}, g); }},
      {"conv2d_weight_grad", {{2, 6, 8}, {3, 3, 4}}, {},
       [g](const Inputs& x) { return conv2d_weight_grad(x[0], x[1], Shape{3, 2, 3, 3}, g); }},
      {"glu", {{4, 5}}, {}, [](const Inputs& x) { return glu(x[0]); }},
      {"instance_norm", {{3, 6}, {3}, {3}}, {},
       [](const Inputs& x) { return instance_norm(x[0], x[1], x[2], 1e-9); }},
      {"pixel_shuffle_1d", {{4, 3}}, {}, [](const Inputs& x) { return pixel_shuffle_1d(x[0], 2); }},
      {"pixel_unshuffle_1d", {{2, 6}}, {},
       [](const Inputs& x) { return pixel_unshuffle_1d(x[0], 2); }},
      {"softmax", {{5}}, {}, [](const Inputs& x) { return softmax(x[0]); }},
  };
}

// Toy networks: the real topologies at the smallest useful width.
GeneratorConfig toy_generator() {
  GeneratorConfig c;
  c.base_channels = 4;
  c.n_residual = 1;
  return c;
}

CriticConfig toy_critic() {
  CriticConfig c;
  c.base_channels = 2;
  c.n_layers = 2;
  return c;
}

ClassifierConfig toy_classifier() {
  ClassifierConfig c;
  c.n_speakers = 4;
  c.embedding_dim = 8;
  c.depth = 2;
  c.base_channels = 4;
  return c;
}

struct ToyWorld {
  Generator<double> gen_xy, gen_yx;
  Critic<double> critic_x, critic_y;
  Classifier<double> classifier;
  T x, y;
  int speaker_x = 1, speaker_y = 2;

  explicit ToyWorld(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    gen_xy = build_generator<double>(toy_generator(), rng, NetworkKind::kGeneratorXY);
    gen_yx = build_generator<double>(toy_generator(), rng, NetworkKind::kGeneratorYX);
    critic_x = build_critic<double>(toy_critic(), rng, NetworkKind::kCriticX);
    critic_y = build_critic<double>(toy_critic(), rng, NetworkKind::kCriticY);
    classifier = build_classifier<double>(toy_classifier(), rng);
    // Nonzero biases and affine terms so no gradient is trivially zero.
    for (auto* params : {&gen_xy.params, &gen_yx.params, &critic_x.params, &critic_y.params,
                         &classifier.params}) {
      std::normal_distribution<double> n(0.0, 0.1);
      for (auto& p : *params) {
        if (p.value.rank() == 1 || p.name.ends_with("bias")) {
          for (auto& v : p.value.data()) v += n(rng);
        }
      }
    }
    x = random_tensor({kMcepDimsToy, kFrames}, rng);
    y = random_tensor({kMcepDimsToy, kFrames}, rng);
  }

  static constexpr std::size_t kMcepDimsToy = 24;
};

V image(const V& v) { return reshape(v, Shape{1, v.shape()[0], v.shape()[1]}); }

std::vector<T> values(std::initializer_list<const ModelParameters<double>*> nets) {
  std::vector<T> out;
  for (const auto* n : nets) {
    for (const auto& p : *n) out.push_back(p.value);
  }
  return out;
}

// Splits grad-check inputs back into per-network bindings.
struct Binder {
  const Inputs& inputs;
  std::size_t next = 0;

  BoundParameters<double> take(const ModelParameters<double>& params) {
    std::vector<V> vars(inputs.begin() + static_cast<std::ptrdiff_t>(next),
                        inputs.begin() + static_cast<std::ptrdiff_t>(next + params.size()));
    next += params.size();
    return BoundParameters<double>(params, std::move(vars));
  }
};

struct LossCase {
  const char* name;
  std::function<std::vector<T>(const ToyWorld&)> points;
  std::function<V(const ToyWorld&, Tape<double>&, const Inputs&)> apply;
};

std::vector<LossCase> loss_cases() {
  std::vector<LossCase> cases;
  cases.push_back({"gan_loss", [](const ToyWorld& w) {
                     return values({&w.gen_xy.params, &w.critic_y.params});
                   },
                   [](const ToyWorld& w, Tape<double>& tape, const Inputs& in) {
                     Binder b{in};
                     auto g = b.take(w.gen_xy.params);
                     auto c = b.take(w.critic_y.params);
                     V fake = generator_forward(w.gen_xy, g, tape.constant(w.x));
                     V p_real = sigmoid(critic_forward(w.critic_y, c, image(tape.constant(w.y))));
                     V p_fake = sigmoid(critic_forward(w.critic_y, c, image(fake)));
                     auto l = adv_loss_gan<double>({p_real}, {p_fake});
                     return add(l.critic, l.generator);
                   }});
  cases.push_back({"cycle_loss", [](const ToyWorld& w) {
                     return values({&w.gen_xy.params, &w.gen_yx.params});
                   },
                   [](const ToyWorld& w, Tape<double>& tape, const Inputs& in) {
                     Binder b{in};
                     auto gxy = b.take(w.gen_xy.params);
                     auto gyx = b.take(w.gen_yx.params);
                     V x = tape.constant(w.x), y = tape.constant(w.y);
                     V xc = generator_forward(w.gen_yx, gyx, generator_forward(w.gen_xy, gxy, x));
                     V yc = generator_forward(w.gen_xy, gxy, generator_forward(w.gen_yx, gyx, y));
                     return cycle_loss<double>({x}, {xc}, {y}, {yc});
                   }});
  cases.push_back({"linguistic_loss", [](const ToyWorld& w) {
                     return values({&w.gen_xy.params, &w.gen_yx.params});
                   },
                   [](const ToyWorld& w, Tape<double>& tape, const Inputs& in) {
                     Binder b{in};
                     auto gxy = b.take(w.gen_xy.params);
                     auto gyx = b.take(w.gen_yx.params);
                     V x = tape.constant(w.x), y = tape.constant(w.y);
                     return linguistic_loss<double>({x}, {generator_forward(w.gen_yx, gyx, x)}, {y},
                                                    {generator_forward(w.gen_xy, gxy, y)});
                   }});
  cases.push_back({"speaker_loss", [](const ToyWorld& w) {
                     return values({&w.gen_xy.params, &w.classifier.params});
                   },
                   [](const ToyWorld& w, Tape<double>& tape, const Inputs& in) {
                     Binder b{in};
                     auto g = b.take(w.gen_xy.params);
                     auto c = b.take(w.classifier.params);
                     V fake = generator_forward(w.gen_xy, g, tape.constant(w.x));
                     V probs = classifier_forward(w.classifier, c, image(fake)).probs;
                     return speaker_loss<double>({probs}, {w.speaker_x}).value;
                   }});
  cases.push_back({"gradient_penalty",
                   [](const ToyWorld& w) { return values({&w.critic_y.params}); },
                   [](const ToyWorld& w, Tape<double>& tape, const Inputs& in) {
                     Binder b{in};
                     auto c = b.take(w.critic_y.params);
                     CriticFn<double> fn = [&](const V& v) {
                       return critic_forward(w.critic_y, c, v);
                     };
                     T mix(Shape{1, w.x.dim(0), w.x.dim(1)});
                     for (std::size_t i = 0; i < mix.size(); ++i) {
                       mix[i] = 0.3 * w.x[i] + 0.7 * w.y[i];
                     }
                     return gradient_penalty(fn, tape, mix);
                   }});
  // Critic side of the WGAN-GP loss; the fake batch is a detached
  // generator output, as in the critic phase of training.
  cases.push_back({"wgan_gp_critic", [](const ToyWorld& w) { return values({&w.critic_y.params}); },
                   [](const ToyWorld& w, Tape<double>& tape, const Inputs& in) {
                     Binder b{in};
                     auto c = b.take(w.critic_y.params);
                     CriticFn<double> fn = [&](const V& v) {
                       return critic_forward(w.critic_y, c, v);
                     };
                     const T fake_value = generator_apply(w.gen_xy, w.x);
                     V fake = image(tape.constant(fake_value));
                     V real = image(tape.constant(w.y));
                     std::mt19937_64 rng(5);  // same interpolation on every evaluation
                     auto l = adv_loss_wgan_gp<double>(fn, {real}, {fake}, 5.0, rng);
                     return add(l.critic, l.generator);
                   }});
  cases.push_back({"full_objective", [](const ToyWorld& w) {
                     return values({&w.gen_xy.params, &w.gen_yx.params});
                   },
                   [](const ToyWorld& w, Tape<double>& tape, const Inputs& in) {
                     Binder b{in};
                     auto gxy = b.take(w.gen_xy.params);
                     auto gyx = b.take(w.gen_yx.params);
                     BoundParameters<double> cx(tape, w.critic_x.params, false);
                     BoundParameters<double> cy(tape, w.critic_y.params, false);
                     BoundParameters<double> cls(tape, w.classifier.params, false);
                     V x = tape.constant(w.x), y = tape.constant(w.y);
                     V fy = generator_forward(w.gen_xy, gxy, x);
                     V fx = generator_forward(w.gen_yx, gyx, y);
                     GeneratorTerms<double> t;
                     t.adv_xy = neg(critic_forward(w.critic_y, cy, image(fy)));
                     t.adv_yx = neg(critic_forward(w.critic_x, cx, image(fx)));
                     t.cycle = cycle_loss<double>({x}, {generator_forward(w.gen_yx, gyx, fy)}, {y},
                                                  {generator_forward(w.gen_xy, gxy, fx)});
                     t.linguistic =
                         linguistic_loss<double>({x}, {generator_forward(w.gen_yx, gyx, x)}, {y},
                                                 {generator_forward(w.gen_xy, gxy, y)});
                     t.speaker = speaker_loss<double>(
                                     {classifier_forward(w.classifier, cls, image(fy)).probs,
                                      classifier_forward(w.classifier, cls, image(fx)).probs},
                                     {w.speaker_x, w.speaker_y})
                                     .value;
                     return full_objective(t, LossWeights{}, AblationFlags{});
                   }});
  return cases;
}

}  // namespace

std::vector<GradSuiteEntry> run_grad_suite(const GradSuiteOptions& options) {
  std::vector<GradSuiteEntry> out;
  std::mt19937_64 rng(options.seed);

  for (const auto& c : op_cases()) {
    GradSuiteEntry e{c.name, "op", kOpTolerance, 0.0, 0, 0};
    for (std::size_t k = 0; k < options.op_points; ++k) {
      std::vector<T> points;
      for (std::size_t i = 0; i < c.shapes.size(); ++i) {
        const Domain d = i < c.domains.size() ? c.domains[i] : Domain::kAny;
        points.push_back(random_tensor(c.shapes[i], rng, d));
      }
      const std::uint64_t weight_seed = rng();
      auto f = [&](Tape<double>& tape, const Inputs& in) {
        return weighted(tape, c.apply(in), weight_seed);
      };
      const auto r = grad_check(f, points);
      e.max_relative_error = std::max(e.max_relative_error, r.max_relative_error);
      e.coordinates += r.coordinates_checked;
      ++e.points;
    }
    out.push_back(e);
  }

  for (const auto& c : loss_cases()) {
    GradSuiteEntry e{c.name, "loss", kLossTolerance, 0.0, 0, 0};
    for (std::size_t k = 0; k < options.loss_points; ++k) {
      const ToyWorld world(rng());
      auto f = [&](Tape<double>& tape, const Inputs& in) { return c.apply(world, tape, in); };
      GradCheckOptions o;
      o.max_coordinates = options.loss_coordinates;
      o.seed = rng();
      const auto r = grad_check(f, c.points(world), o);
      e.max_relative_error = std::max(e.max_relative_error, r.max_relative_error);
      e.coordinates += r.coordinates_checked;
      ++e.points;
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace emotrans
