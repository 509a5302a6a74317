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

// Raw tensor kernels behind the differentiable ops. Not part of the public
// surface; callers are responsible for shape validation.

#include "emotrans/ops.h"
#include "emotrans/tensor.h"

namespace emotrans::kernels {

template <typename Real>
Tensor<Real> conv2d_forward(const Tensor<Real>& input, const Tensor<Real>& weight,
                            const Conv2dGeometry& g);

template <typename Real>
Tensor<Real> conv2d_backward_input(const Tensor<Real>& grad_output, const Tensor<Real>& weight,
                                   const Shape& input_shape, const Conv2dGeometry& g);

template <typename Real>
Tensor<Real> conv2d_backward_weight(const Tensor<Real>& input, const Tensor<Real>& grad_output,
                                    const Shape& weight_shape, const Conv2dGeometry& g);

/// op(a) * op(b) for 2-D tensors, where op transposes when requested.
template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, bool transpose_a, const Tensor<Real>& b,
                    bool transpose_b);

}  // namespace emotrans::kernels
