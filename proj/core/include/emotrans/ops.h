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

#include "emotrans/tape.h"

// Differentiable ops. Every function records its result on the tape of its
// inputs. Unless noted otherwise the backward pass of an op is itself built
// from recorded ops and therefore supports create_graph; the exceptions
// (abs, log, exp, softplus, clamp_min, softmax, pixel shuffles) raise a
// ContractError if a create_graph sweep reaches them.

namespace emotrans {

struct Conv2dGeometry {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};

// Elementwise, operands of identical shape.
template <typename Real> Var<Real> add(const Var<Real>& a, const Var<Real>& b);
template <typename Real> Var<Real> sub(const Var<Real>& a, const Var<Real>& b);
template <typename Real> Var<Real> mul(const Var<Real>& a, const Var<Real>& b);
template <typename Real> Var<Real> div(const Var<Real>& a, const Var<Real>& b);

template <typename Real> Var<Real> neg(const Var<Real>& a);
template <typename Real> Var<Real> scale(const Var<Real>& a, Real factor);
template <typename Real> Var<Real> add_scalar(const Var<Real>& a, Real offset);
template <typename Real> Var<Real> square(const Var<Real>& a);
template <typename Real> Var<Real> sqrt(const Var<Real>& a);
template <typename Real> Var<Real> sigmoid(const Var<Real>& a);
/// max(x, slope * x); the slope is 0.2 throughout the networks.
template <typename Real> Var<Real> leaky_relu(const Var<Real>& a, Real slope = Real(0.2));

/// |x| with subgradient 0 at x == 0.
template <typename Real> Var<Real> abs(const Var<Real>& a);
template <typename Real> Var<Real> log(const Var<Real>& a);
template <typename Real> Var<Real> exp(const Var<Real>& a);
/// log(1 + e^x), evaluated without overflow.
template <typename Real> Var<Real> softplus(const Var<Real>& a);
template <typename Real> Var<Real> clamp_min(const Var<Real>& a, Real lower);

// Reductions to a one-element tensor.
template <typename Real> Var<Real> sum(const Var<Real>& a);
template <typename Real> Var<Real> mean(const Var<Real>& a);
/// sqrt(sum(x^2)).
template <typename Real> Var<Real> l2_norm(const Var<Real>& a);

// Per-channel helpers for tensors laid out as [C, ...].
template <typename Real> Var<Real> channel_sum(const Var<Real>& a);
template <typename Real> Var<Real> channel_mean(const Var<Real>& a);
/// Repeats v[C] over the trailing dims of `shape` (shape[0] must equal C).
template <typename Real> Var<Real> broadcast_channels(const Var<Real>& v, const Shape& shape);
/// x + b broadcast over channels.
template <typename Real> Var<Real> bias_add(const Var<Real>& x, const Var<Real>& bias);

// Shape manipulation.
template <typename Real> Var<Real> reshape(const Var<Real>& a, const Shape& shape);
/// Slice [start, start + length) of axis 0.
template <typename Real> Var<Real> narrow(const Var<Real>& a, std::size_t start, std::size_t length);
/// Inverse of narrow: zero tensor with axis 0 of size `total`, `a` placed at `start`.
template <typename Real> Var<Real> embed(const Var<Real>& a, std::size_t start, std::size_t total);
template <typename Real> Var<Real> transpose(const Var<Real>& a);

/// [m, k] x [k, n] -> [m, n].
template <typename Real> Var<Real> matmul(const Var<Real>& a, const Var<Real>& b);
/// x[1, in] w[in, out] + b[1, out].
template <typename Real>
Var<Real> linear(const Var<Real>& x, const Var<Real>& weight, const Var<Real>& bias);

/// Cross-correlation of x[C_in, H, W] with w[C_out, C_in, Kh, Kw].
template <typename Real>
Var<Real> conv2d(const Var<Real>& input, const Var<Real>& weight, Conv2dGeometry geometry);
/// Gradient of conv2d with respect to its input (a transposed convolution).
template <typename Real>
Var<Real> conv2d_input_grad(const Var<Real>& grad_output, const Var<Real>& weight,
                            const Shape& input_shape, Conv2dGeometry geometry);
/// Gradient of conv2d with respect to its weight.
template <typename Real>
Var<Real> conv2d_weight_grad(const Var<Real>& input, const Var<Real>& grad_output,
                             const Shape& weight_shape, Conv2dGeometry geometry);
/// Cross-correlation of x[C_in, T] with w[C_out, C_in, K] along time.
template <typename Real>
Var<Real> conv1d(const Var<Real>& input, const Var<Real>& weight, std::size_t stride,
                 std::size_t padding);

/// Gated linear unit over axis 0: first half times sigmoid of second half.
template <typename Real> Var<Real> glu(const Var<Real>& a);

/// Per-channel standardization over all trailing positions, population
/// variance, then gamma/beta affine.
template <typename Real>
Var<Real> instance_norm(const Var<Real>& x, const Var<Real>& gamma, const Var<Real>& beta,
                        Real epsilon);

/// [C*r, T] -> [C, T*r] with out[c, t*r + k] = in[c*r + k, t].
template <typename Real> Var<Real> pixel_shuffle_1d(const Var<Real>& a, std::size_t factor);
/// Inverse permutation of pixel_shuffle_1d.
template <typename Real> Var<Real> pixel_unshuffle_1d(const Var<Real>& a, std::size_t factor);

/// Softmax over a 1-D tensor.
template <typename Real> Var<Real> softmax(const Var<Real>& a);

}  // namespace emotrans
