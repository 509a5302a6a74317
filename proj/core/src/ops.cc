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

#include "emotrans/ops.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "kernels.h"

namespace emotrans {
namespace {

template <typename Real, typename F>
Tensor<Real> map_values(const Tensor<Real>& a, F f) {
  Tensor<Real> out(a.shape());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename Real, typename F>
Tensor<Real> zip_values(const Tensor<Real>& a, const Tensor<Real>& b, F f) {
  Tensor<Real> out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

template <typename Real>
void require_same_shape(const char* op, const Var<Real>& a, const Var<Real>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": operand shapes differ, " +
                         shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  }
}

template <typename Real>
Var<Real> constant_like(const Var<Real>& ref, Tensor<Real> value) {
  return ref.tape().constant(std::move(value));
}

// Broadcasts a one-element var over `shape`; adjoint of sum().
template <typename Real>
Var<Real> expand_scalar(const Var<Real>& s, const Shape& shape) {
  if (s.value().size() != 1) {
    throw DimensionError("expand_scalar: expected one element, got shape " +
                         shape_to_string(s.shape()));
  }
  return s.tape().record(
      "expand_scalar", Tensor<Real>(shape, s.value()[0]), {s}, true,
      [](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{reshape(sum(g), in[0].shape())};
      });
}

template <typename Real>
Real sigmoid_value(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

std::size_t inner_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) n *= shape[i];
  return n;
}

}  // namespace

template <typename Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape("add", a, b);
  return a.tape().record(
      "add", zip_values(a.value(), b.value(), [](Real x, Real y) { return x + y; }), {a, b},
      true, [](const std::vector<Var<Real>>&, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{g, g};
      });
}

template <typename Real>
Var<Real> sub(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape("sub", a, b);
  return a.tape().record(
      "sub", zip_values(a.value(), b.value(), [](Real x, Real y) { return x - y; }), {a, b},
      true, [](const std::vector<Var<Real>>&, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{g, neg(g)};
      });
}

template <typename Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape("mul", a, b);
  return a.tape().record(
      "mul", zip_values(a.value(), b.value(), [](Real x, Real y) { return x * y; }), {a, b},
      true, [](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{mul(g, in[1]), mul(g, in[0])};
      });
}

template <typename Real>
Var<Real> div(const Var<Real>& a, const Var<Real>& b) {
  require_same_shape("div", a, b);
  return a.tape().record(
      "div", zip_values(a.value(), b.value(), [](Real x, Real y) { return x / y; }), {a, b},
      true, [](const std::vector<Var<Real>>& in, const Var<Real>& out, const Var<Real>& g) {
        return std::vector<Var<Real>>{div(g, in[1]), neg(div(mul(g, out), in[1]))};
      });
}

template <typename Real>
Var<Real> neg(const Var<Real>& a) {
  return a.tape().record(
      "neg", map_values(a.value(), [](Real x) { return -x; }), {a}, true,
      [](const std::vector<Var<Real>>&, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{neg(g)};
      });
}

template <typename Real>
Var<Real> scale(const Var<Real>& a, Real factor) {
  return a.tape().record(
      "scale", map_values(a.value(), [factor](Real x) { return x * factor; }), {a}, true,
      [factor](const std::vector<Var<Real>>&, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{scale(g, factor)};
      });
}

template <typename Real>
Var<Real> add_scalar(const Var<Real>& a, Real offset) {
  return a.tape().record(
      "add_scalar", map_values(a.value(), [offset](Real x) { return x + offset; }), {a}, true,
      [](const std::vector<Var<Real>>&, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{g};
      });
}

template <typename Real>
Var<Real> square(const Var<Real>& a) {
  return a.tape().record(
      "square", map_values(a.value(), [](Real x) { return x * x; }), {a}, true,
      [](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{mul(g, scale(in[0], Real(2)))};
      });
}

template <typename Real>
Var<Real> sqrt(const Var<Real>& a) {
  return a.tape().record(
      "sqrt", map_values(a.value(), [](Real x) { return std::sqrt(x); }), {a}, true,
      [](const std::vector<Var<Real>>&, const Var<Real>& out, const Var<Real>& g) {
        return std::vector<Var<Real>>{div(scale(g, Real(0.5)), out)};
      });
}

template <typename Real>
Var<Real> sigmoid(const Var<Real>& a) {
  auto value = map_values(a.value(), [](Real x) { return sigmoid_value(x); });
  return a.tape().record(
      "sigmoid", std::move(value), {a}, true,
      [](const std::vector<Var<Real>>&, const Var<Real>& s, const Var<Real>& g) {
        return std::vector<Var<Real>>{mul(g, mul(s, add_scalar(neg(s), Real(1))))};
      });
}

template <typename Real>
Var<Real> leaky_relu(const Var<Real>& a, Real slope) {
  auto value = map_values(a.value(), [slope](Real x) { return x > 0 ? x : slope * x; });
  return a.tape().record(
      "leaky_relu", std::move(value), {a}, true,
      [slope](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        auto mask = map_values(in[0].value(), [slope](Real x) { return x > 0 ? Real(1) : slope; });
        return std::vector<Var<Real>>{mul(g, constant_like(g, std::move(mask)))};
      });
}

template <typename Real>
Var<Real> abs(const Var<Real>& a) {
  return a.tape().record(
      "abs", map_values(a.value(), [](Real x) { return std::abs(x); }), {a}, false,
      [](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        auto sign = map_values(in[0].value(), [](Real x) {
          return x > 0 ? Real(1) : (x < 0 ? Real(-1) : Real(0));
        });
        return std::vector<Var<Real>>{mul(g, constant_like(g, std::move(sign)))};
      });
}

template <typename Real>
Var<Real> log(const Var<Real>& a) {
  return a.tape().record(
      "log", map_values(a.value(), [](Real x) { return std::log(x); }), {a}, false,
      [](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{div(g, in[0])};
      });
}

template <typename Real>
Var<Real> exp(const Var<Real>& a) {
  return a.tape().record(
      "exp", map_values(a.value(), [](Real x) { return std::exp(x); }), {a}, false,
      [](const std::vector<Var<Real>>&, const Var<Real>& out, const Var<Real>& g) {
        return std::vector<Var<Real>>{mul(g, out)};
      });
}

template <typename Real>
Var<Real> softplus(const Var<Real>& a) {
  auto value = map_values(a.value(), [](Real x) {
    return std::max(x, Real(0)) + std::log1p(std::exp(-std::abs(x)));
  });
  return a.tape().record(
      "softplus", std::move(value), {a}, false,
      [](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{mul(g, sigmoid(in[0]))};
      });
}

template <typename Real>
Var<Real> clamp_min(const Var<Real>& a, Real lower) {
  return a.tape().record(
      "clamp_min", map_values(a.value(), [lower](Real x) { return std::max(x, lower); }), {a},
      false, [lower](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        auto mask = map_values(in[0].value(), [lower](Real x) { return x >= lower ? Real(1) : Real(0); });
        return std::vector<Var<Real>>{mul(g, constant_like(g, std::move(mask)))};
      });
}

template <typename Real>
Var<Real> sum(const Var<Real>& a) {
  Real total = 0;
  for (Real v : a.value().data()) total += v;
  return a.tape().record(
      "sum", Tensor<Real>::scalar(total), {a}, true,
      [](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{expand_scalar(g, in[0].shape())};
      });
}

template <typename Real>
Var<Real> mean(const Var<Real>& a) {
  return scale(sum(a), Real(1) / static_cast<Real>(a.value().size()));
}

template <typename Real>
Var<Real> l2_norm(const Var<Real>& a) {
  return sqrt(sum(square(a)));
}

template <typename Real>
Var<Real> channel_sum(const Var<Real>& a) {
  const Shape& shape = a.shape();
  const std::size_t channels = shape[0];
  const std::size_t inner = inner_size(shape);
  Tensor<Real> out(Shape{channels});
  auto x = a.value().data();
  for (std::size_t c = 0; c < channels; ++c) {
    Real s = 0;
    for (std::size_t i = 0; i < inner; ++i) s += x[c * inner + i];
    out[c] = s;
  }
  return a.tape().record(
      "channel_sum", std::move(out), {a}, true,
      [](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{broadcast_channels(g, in[0].shape())};
      });
}

template <typename Real>
Var<Real> channel_mean(const Var<Real>& a) {
  return scale(channel_sum(a), Real(1) / static_cast<Real>(inner_size(a.shape())));
}

template <typename Real>
Var<Real> broadcast_channels(const Var<Real>& v, const Shape& shape) {
  if (v.shape().size() != 1 || shape.empty() || v.shape()[0] != shape[0]) {
    throw DimensionError("broadcast_channels: vector of shape " + shape_to_string(v.shape()) +
                         " does not match channel axis of " + shape_to_string(shape));
  }
  const std::size_t inner = inner_size(shape);
  Tensor<Real> out(shape);
  auto src = v.value().data();
  auto dst = out.data();
  for (std::size_t c = 0; c < shape[0]; ++c) {
    std::fill(dst.begin() + c * inner, dst.begin() + (c + 1) * inner, src[c]);
  }
  return v.tape().record(
      "broadcast_channels", std::move(out), {v}, true,
      [](const std::vector<Var<Real>>&, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{channel_sum(g)};
      });
}

template <typename Real>
Var<Real> bias_add(const Var<Real>& x, const Var<Real>& bias) {
  const Shape& shape = x.shape();
  if (bias.shape().size() != 1 || shape.empty() || bias.shape()[0] != shape[0]) {
    throw DimensionError("bias_add: bias of shape " + shape_to_string(bias.shape()) +
                         " does not match channel axis of " + shape_to_string(shape));
  }
  const std::size_t inner = inner_size(shape);
  Tensor<Real> out = x.value();
  auto dst = out.data();
  auto b = bias.value().data();
  for (std::size_t c = 0; c < shape[0]; ++c) {
    for (std::size_t i = 0; i < inner; ++i) dst[c * inner + i] += b[c];
  }
  return x.tape().record(
      "bias_add", std::move(out), {x, bias}, true,
      [](const std::vector<Var<Real>>&, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{g, channel_sum(g)};
      });
}

template <typename Real>
Var<Real> reshape(const Var<Real>& a, const Shape& shape) {
  return a.tape().record(
      "reshape", a.value().reshaped(shape), {a}, true,
      [](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{reshape(g, in[0].shape())};
      });
}

template <typename Real>
Var<Real> narrow(const Var<Real>& a, std::size_t start, std::size_t length) {
  const Shape& shape = a.shape();
  if (length == 0 || start + length > shape[0]) {
    throw DimensionError("narrow: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") outside axis 0 of " +
                         shape_to_string(shape));
  }
  const std::size_t inner = inner_size(shape);
  Shape out_shape = shape;
  out_shape[0] = length;
  auto src = a.value().data();
  std::vector<Real> data(src.begin() + start * inner, src.begin() + (start + length) * inner);
  const std::size_t total = shape[0];
  return a.tape().record(
      "narrow", Tensor<Real>(out_shape, std::move(data)), {a}, true,
      [start, total](const std::vector<Var<Real>>&, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{embed(g, start, total)};
      });
}

template <typename Real>
Var<Real> embed(const Var<Real>& a, std::size_t start, std::size_t total) {
  const Shape& shape = a.shape();
  const std::size_t length = shape[0];
  if (start + length > total) {
    throw DimensionError("embed: " + shape_to_string(shape) + " at offset " +
                         std::to_string(start) + " exceeds axis size " + std::to_string(total));
  }
  const std::size_t inner = inner_size(shape);
  Shape out_shape = shape;
  out_shape[0] = total;
  Tensor<Real> out(out_shape);
  std::copy(a.value().data().begin(), a.value().data().end(),
            out.data().begin() + start * inner);
  return a.tape().record(
      "embed", std::move(out), {a}, true,
      [start, length](const std::vector<Var<Real>>&, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{narrow(g, start, length)};
      });
}

template <typename Real>
Var<Real> transpose(const Var<Real>& a) {
  if (a.shape().size() != 2) {
    throw DimensionError("transpose: expected a 2-D tensor, got " + shape_to_string(a.shape()));
  }
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  Tensor<Real> out(Shape{cols, rows});
  auto src = a.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  }
  return a.tape().record(
      "transpose", std::move(out), {a}, true,
      [](const std::vector<Var<Real>>&, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{transpose(g)};
      });
}

template <typename Real>
Var<Real> matmul(const Var<Real>& a, const Var<Real>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) +
                         " x " + shape_to_string(b.shape()));
  }
  return a.tape().record(
      "matmul", kernels::matmul(a.value(), false, b.value(), false), {a, b}, true,
      [](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{matmul(g, transpose(in[1])), matmul(transpose(in[0]), g)};
      });
}

template <typename Real>
Var<Real> linear(const Var<Real>& x, const Var<Real>& weight, const Var<Real>& bias) {
  return add(matmul(x, weight), bias);
}

namespace {

void check_conv2d(const Shape& input, const Shape& weight, const Conv2dGeometry& g) {
  if (input.size() != 3) {
    throw DimensionError("conv2d: input must be [C, H, W], got " + shape_to_string(input));
  }
  if (weight.size() != 4) {
    throw DimensionError("conv2d: weight must be [C_out, C_in, Kh, Kw], got " +
                         shape_to_string(weight));
  }
  if (input[0] != weight[1]) {
    throw DimensionError("conv2d: input channel axis (" + std::to_string(input[0]) +
                         ") does not match weight C_in axis (" + std::to_string(weight[1]) + ")");
  }
  if (g.stride_h == 0 || g.stride_w == 0) throw ContractError("conv2d: stride must be >= 1");
  if (weight[2] > input[1] + 2 * g.pad_h) {
    throw DimensionError("conv2d: kernel height axis (" + std::to_string(weight[2]) +
                         ") exceeds padded input height axis (" +
                         std::to_string(input[1] + 2 * g.pad_h) + ")");
  }
  if (weight[3] > input[2] + 2 * g.pad_w) {
    throw DimensionError("conv2d: kernel width axis (" + std::to_string(weight[3]) +
                         ") exceeds padded input width axis (" +
                         std::to_string(input[2] + 2 * g.pad_w) + ")");
  }
}

}  // namespace

template <typename Real>
Var<Real> conv2d(const Var<Real>& input, const Var<Real>& weight, Conv2dGeometry geometry) {
  check_conv2d(input.shape(), weight.shape(), geometry);
  return input.tape().record(
      "conv2d", kernels::conv2d_forward(input.value(), weight.value(), geometry), {input, weight},
      true,
      [geometry](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{
            conv2d_input_grad(g, in[1], in[0].shape(), geometry),
            conv2d_weight_grad(in[0], g, in[1].shape(), geometry)};
      });
}

template <typename Real>
Var<Real> conv2d_input_grad(const Var<Real>& grad_output, const Var<Real>& weight,
                            const Shape& input_shape, Conv2dGeometry geometry) {
  check_conv2d(input_shape, weight.shape(), geometry);
  return grad_output.tape().record(
      "conv2d_input_grad",
      kernels::conv2d_backward_input(grad_output.value(), weight.value(), input_shape, geometry),
      {grad_output, weight}, true,
      [geometry](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& h) {
        return std::vector<Var<Real>>{conv2d(h, in[1], geometry),
                                      conv2d_weight_grad(h, in[0], in[1].shape(), geometry)};
      });
}

template <typename Real>
Var<Real> conv2d_weight_grad(const Var<Real>& input, const Var<Real>& grad_output,
                             const Shape& weight_shape, Conv2dGeometry geometry) {
  check_conv2d(input.shape(), weight_shape, geometry);
  return input.tape().record(
      "conv2d_weight_grad",
      kernels::conv2d_backward_weight(input.value(), grad_output.value(), weight_shape, geometry),
      {input, grad_output}, true,
      [geometry](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& h) {
        return std::vector<Var<Real>>{conv2d_input_grad(in[1], h, in[0].shape(), geometry),
                                      conv2d(in[0], h, geometry)};
      });
}

template <typename Real>
Var<Real> conv1d(const Var<Real>& input, const Var<Real>& weight, std::size_t stride,
                 std::size_t padding) {
  const Shape& x = input.shape();
  const Shape& w = weight.shape();
  if (x.size() != 2) {
    throw DimensionError("conv1d: input must be [C, T], got " + shape_to_string(x));
  }
  if (w.size() != 3) {
    throw DimensionError("conv1d: weight must be [C_out, C_in, K], got " + shape_to_string(w));
  }
  if (x[0] != w[1]) {
    throw DimensionError("conv1d: input channel axis (" + std::to_string(x[0]) +
                         ") does not match weight C_in axis (" + std::to_string(w[1]) + ")");
  }
  if (w[2] > x[1] + 2 * padding) {
    throw DimensionError("conv1d: kernel axis (" + std::to_string(w[2]) +
                         ") exceeds padded time axis (" + std::to_string(x[1] + 2 * padding) +
                         ")");
  }
  if (stride == 0) throw ContractError("conv1d: stride must be >= 1");
  Conv2dGeometry g{1, stride, 0, padding};
  auto y = conv2d(reshape(input, Shape{x[0], 1, x[1]}), reshape(weight, Shape{w[0], w[1], 1, w[2]}), g);
  return reshape(y, Shape{y.shape()[0], y.shape()[2]});
}

template <typename Real>
Var<Real> glu(const Var<Real>& a) {
  const Shape& shape = a.shape();
  const std::size_t channels = shape[0];
  if (channels % 2 != 0) {
    throw DimensionError("glu: channel axis must be even, got " + std::to_string(channels));
  }
  const std::size_t half = channels / 2;
  const std::size_t n = half * inner_size(shape);
  Shape out_shape = shape;
  out_shape[0] = half;
  Tensor<Real> out(out_shape);
  auto src = a.value().data();
  auto dst = out.data();
  for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] * sigmoid_value(src[n + i]);
  return a.tape().record(
      "glu", std::move(out), {a}, true,
      [half, n](const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        if (g.tape().grad_enabled()) {
          auto lin = narrow(in[0], 0, half);
          auto gate = sigmoid(narrow(in[0], half, half));
          auto d_lin = mul(g, gate);
          auto d_gate = mul(mul(g, lin), mul(gate, add_scalar(neg(gate), Real(1))));
          return std::vector<Var<Real>>{add(embed(d_lin, 0, 2 * half), embed(d_gate, half, 2 * half))};
        }
        Tensor<Real> d(in[0].shape());
        auto x = in[0].value().data();
        auto gv = g.value().data();
        auto dv = d.data();
        for (std::size_t i = 0; i < n; ++i) {
          const Real s = sigmoid_value(x[n + i]);
          dv[i] = gv[i] * s;
          dv[n + i] = gv[i] * x[i] * s * (Real(1) - s);
        }
        return std::vector<Var<Real>>{g.tape().constant(std::move(d))};
      });
}

template <typename Real>
Var<Real> instance_norm(const Var<Real>& x, const Var<Real>& gamma, const Var<Real>& beta,
                        Real epsilon) {
  const Shape& shape = x.shape();
  if (shape.size() < 2) {
    throw DimensionError("instance_norm: expected [C, ...spatial], got " + shape_to_string(shape));
  }
  const Shape channel_shape{shape[0]};
  if (gamma.shape() != channel_shape || beta.shape() != channel_shape) {
    throw DimensionError("instance_norm: gamma/beta must have shape " +
                         shape_to_string(channel_shape));
  }
  const std::size_t channels = shape[0], inner = inner_size(shape);
  // xhat is kept for the first-order backward
  Tensor<Real> xhat(shape), out(shape), inv_std(channel_shape);
  {
    auto src = x.value().data();
    auto h = xhat.data();
    auto y = out.data();
    auto gm = gamma.value().data();
    auto bt = beta.value().data();
    for (std::size_t c = 0; c < channels; ++c) {
      const Real* row = src.data() + c * inner;
      Real m = 0;
      for (std::size_t i = 0; i < inner; ++i) m += row[i];
      m /= static_cast<Real>(inner);
      Real v = 0;
      for (std::size_t i = 0; i < inner; ++i) v += (row[i] - m) * (row[i] - m);
      v /= static_cast<Real>(inner);
      const Real r = Real(1) / std::sqrt(v + epsilon);
      inv_std[c] = r;
      for (std::size_t i = 0; i < inner; ++i) {
        h[c * inner + i] = (row[i] - m) * r;
        y[c * inner + i] = gm[c] * h[c * inner + i] + bt[c];
      }
    }
  }
  return x.tape().record(
      "instance_norm", std::move(out), {x, gamma, beta}, true,
      [epsilon, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          const std::vector<Var<Real>>& in, const Var<Real>&, const Var<Real>& g) {
        const Shape& shape = in[0].shape();
        if (g.tape().grad_enabled()) {
          auto centered = sub(in[0], broadcast_channels(channel_mean(in[0]), shape));
          auto stddev = sqrt(add_scalar(channel_mean(square(centered)), epsilon));
          auto h = div(centered, broadcast_channels(stddev, shape));
          auto gx = mul(g, broadcast_channels(in[1], shape));
          auto dx = sub(sub(gx, broadcast_channels(channel_mean(gx), shape)),
                        mul(h, broadcast_channels(channel_mean(mul(gx, h)), shape)));
          return std::vector<Var<Real>>{div(dx, broadcast_channels(stddev, shape)),
                                        channel_sum(mul(g, h)), channel_sum(g)};
        }
        const std::size_t channels = shape[0], inner = inner_size(shape);
        Tensor<Real> dx(shape), dgamma(Shape{channels}), dbeta(Shape{channels});
        auto gv = g.value().data();
        auto h = xhat.data();
        auto gm = in[1].value().data();
        auto d = dx.data();
        for (std::size_t c = 0; c < channels; ++c) {
          Real sg = 0, sgh = 0;
          for (std::size_t i = 0; i < inner; ++i) {
            sg += gv[c * inner + i];
            sgh += gv[c * inner + i] * h[c * inner + i];
          }
          dgamma[c] = sgh;
          dbeta[c] = sg;
          const Real mg = gm[c] * sg / static_cast<Real>(inner);
          const Real mgh = gm[c] * sgh / static_cast<Real>(inner);
          for (std::size_t i = 0; i < inner; ++i) {
            d[c * inner + i] =
                (gm[c] * gv[c * inner + i] - mg - h[c * inner + i] * mgh) * inv_std[c];
          }
        }
        auto& tape = g.tape();
        return std::vector<Var<Real>>{tape.constant(std::move(dx)), tape.constant(std::move(dgamma)),
                                      tape.constant(std::move(dbeta))};
      });
}

template <typename Real>
Var<Real> pixel_shuffle_1d(const Var<Real>& a, std::size_t factor) {
  const Shape& shape = a.shape();
  if (shape.size() != 2 || factor == 0 || shape[0] % factor != 0) {
    throw DimensionError("pixel_shuffle_1d: channel axis of " + shape_to_string(shape) +
                         " is not divisible by " + std::to_string(factor));
  }
  const std::size_t channels = shape[0] / factor, steps = shape[1];
  Tensor<Real> out(Shape{channels, steps * factor});
  auto src = a.value().data();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t k = 0; k < factor; ++k) {
      for (std::size_t t = 0; t < steps; ++t) {
        out[c * steps * factor + t * factor + k] = src[(c * factor + k) * steps + t];
      }
    }
  }
  return a.tape().record(
      "pixel_shuffle_1d", std::move(out), {a}, false,
      [factor](const std::vector<Var<Real>>&, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{pixel_unshuffle_1d(g, factor)};
      });
}

template <typename Real>
Var<Real> pixel_unshuffle_1d(const Var<Real>& a, std::size_t factor) {
  const Shape& shape = a.shape();
  if (shape.size() != 2 || factor == 0 || shape[1] % factor != 0) {
    throw DimensionError("pixel_unshuffle_1d: time axis of " + shape_to_string(shape) +
                         " is not divisible by " + std::to_string(factor));
  }
  const std::size_t channels = shape[0], steps = shape[1] / factor;
  Tensor<Real> out(Shape{channels * factor, steps});
  auto src = a.value().data();
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t k = 0; k < factor; ++k) {
      for (std::size_t t = 0; t < steps; ++t) {
        out[(c * factor + k) * steps + t] = src[c * steps * factor + t * factor + k];
      }
    }
  }
  return a.tape().record(
      "pixel_unshuffle_1d", std::move(out), {a}, false,
      [factor](const std::vector<Var<Real>>&, const Var<Real>&, const Var<Real>& g) {
        return std::vector<Var<Real>>{pixel_shuffle_1d(g, factor)};
      });
}

template <typename Real>
Var<Real> softmax(const Var<Real>& a) {
  if (a.shape().size() != 1) {
    throw DimensionError("softmax: expected a 1-D tensor, got " + shape_to_string(a.shape()));
  }
  auto x = a.value().data();
  const Real peak = *std::max_element(x.begin(), x.end());
  Tensor<Real> out(a.shape());
  Real total = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - peak);
    total += out[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] /= total;
  return a.tape().record(
      "softmax", std::move(out), {a}, false,
      [](const std::vector<Var<Real>>&, const Var<Real>& s, const Var<Real>& g) {
        auto sv = s.value().data();
        auto gv = g.value().data();
        Real dot = 0;
        for (std::size_t i = 0; i < sv.size(); ++i) dot += gv[i] * sv[i];
        Tensor<Real> grad(s.shape());
        for (std::size_t i = 0; i < sv.size(); ++i) grad[i] = sv[i] * (gv[i] - dot);
        return std::vector<Var<Real>>{g.tape().constant(std::move(grad))};
      });
}

#define EMOTRANS_INSTANTIATE_OPS(Real)                                                       \
  template Var<Real> add(const Var<Real>&, const Var<Real>&);                               \
  template Var<Real> sub(const Var<Real>&, const Var<Real>&);                               \
  template Var<Real> mul(const Var<Real>&, const Var<Real>&);                               \
  template Var<Real> div(const Var<Real>&, const Var<Real>&);                               \
  template Var<Real> neg(const Var<Real>&);                                                 \
  template Var<Real> scale(const Var<Real>&, Real);                                         \
  template Var<Real> add_scalar(const Var<Real>&, Real);                                    \
  template Var<Real> square(const Var<Real>&);                                              \
  template Var<Real> sqrt(const Var<Real>&);                                                \
  template Var<Real> sigmoid(const Var<Real>&);                                             \
  template Var<Real> leaky_relu(const Var<Real>&, Real);                                    \
  template Var<Real> abs(const Var<Real>&);                                                 \
  template Var<Real> log(const Var<Real>&);                                                 \
  template Var<Real> exp(const Var<Real>&);                                                 \
  template Var<Real> softplus(const Var<Real>&);                                            \
  template Var<Real> clamp_min(const Var<Real>&, Real);                                     \
  template Var<Real> sum(const Var<Real>&);                                                 \
  template Var<Real> mean(const Var<Real>&);                                                \
  template Var<Real> l2_norm(const Var<Real>&);                                             \
  template Var<Real> channel_sum(const Var<Real>&);                                         \
  template Var<Real> channel_mean(const Var<Real>&);                                        \
  template Var<Real> broadcast_channels(const Var<Real>&, const Shape&);                    \
  template Var<Real> bias_add(const Var<Real>&, const Var<Real>&);                          \
  template Var<Real> reshape(const Var<Real>&, const Shape&);                               \
  template Var<Real> narrow(const Var<Real>&, std::size_t, std::size_t);                    \
  template Var<Real> embed(const Var<Real>&, std::size_t, std::size_t);                     \
  template Var<Real> transpose(const Var<Real>&);                                           \
  template Var<Real> matmul(const Var<Real>&, const Var<Real>&);                            \
  template Var<Real> linear(const Var<Real>&, const Var<Real>&, const Var<Real>&);          \
  template Var<Real> conv2d(const Var<Real>&, const Var<Real>&, Conv2dGeometry);            \
  template Var<Real> conv2d_input_grad(const Var<Real>&, const Var<Real>&, const Shape&,    \
                                       Conv2dGeometry);                                      \
  template Var<Real> conv2d_weight_grad(const Var<Real>&, const Var<Real>&, const Shape&,   \
                                        Conv2dGeometry);                                     \
  template Var<Real> conv1d(const Var<Real>&, const Var<Real>&, std::size_t, std::size_t);  \
  template Var<Real> glu(const Var<Real>&);                                                 \
  template Var<Real> instance_norm(const Var<Real>&, const Var<Real>&, const Var<Real>&,    \
                                   Real);                                                    \
  template Var<Real> pixel_shuffle_1d(const Var<Real>&, std::size_t);                       \
  template Var<Real> pixel_unshuffle_1d(const Var<Real>&, std::size_t);                     \
  template Var<Real> softmax(const Var<Real>&);

EMOTRANS_INSTANTIATE_OPS(float)
EMOTRANS_INSTANTIATE_OPS(double)

}  // namespace emotrans
