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

#include "kernels.h"

#include <algorithm>

#include <Eigen/Core>

namespace emotrans::kernels {
namespace {

template <typename Real>
using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvDims {
  std::size_t channels, height, width;
  std::size_t kernel_h, kernel_w;
  std::size_t out_h, out_w;
};

ConvDims conv_dims(const Shape& input, const Shape& weight, const Conv2dGeometry& g) {
  ConvDims d{};
  d.channels = input[0];
  d.height = input[1];
  d.width = input[2];
  d.kernel_h = weight[2];
  d.kernel_w = weight[3];
  d.out_h = (d.height + 2 * g.pad_h - d.kernel_h) / g.stride_h + 1;
  d.out_w = (d.width + 2 * g.pad_w - d.kernel_w) / g.stride_w + 1;
  return d;
}

// Output columns [lo, hi) whose input column ow * stride + k - pad is inside [0, width).
struct Span {
  std::size_t lo, hi;
};

Span valid_outputs(std::size_t k, std::size_t pad, std::size_t stride, std::size_t width,
                   std::size_t out) {
  const long first = static_cast<long>(pad) - static_cast<long>(k);
  const long s = static_cast<long>(stride);
  const long lo = first <= 0 ? 0 : (first + s - 1) / s;
  const long end = static_cast<long>(width) + first;  // ow * s < end
  const long hi = end <= 0 ? 0 : (end + s - 1) / s;
  Span r{static_cast<std::size_t>(std::min<long>(lo, static_cast<long>(out))),
         static_cast<std::size_t>(std::clamp<long>(hi, 0, static_cast<long>(out)))};
  if (r.hi < r.lo) r.hi = r.lo;
  return r;
}

// Unfolds the receptive fields of x[C, H, W] into columns of
// [C * Kh * Kw, Ho * Wo]; padded positions read as zero.
template <typename Real>
RowMatrix<Real> im2col(const Real* x, const ConvDims& d, const Conv2dGeometry& g) {
  const std::size_t cols = d.out_h * d.out_w;
  RowMatrix<Real> col(d.channels * d.kernel_h * d.kernel_w, cols);
  for (std::size_t c = 0; c < d.channels; ++c) {
    for (std::size_t kh = 0; kh < d.kernel_h; ++kh) {
      for (std::size_t kw = 0; kw < d.kernel_w; ++kw) {
        Real* row = col.data() + ((c * d.kernel_h + kh) * d.kernel_w + kw) * cols;
        for (std::size_t oh = 0; oh < d.out_h; ++oh) {
          const long ih = static_cast<long>(oh * g.stride_h + kh) - static_cast<long>(g.pad_h);
          Real* dst = row + oh * d.out_w;
          if (ih < 0 || ih >= static_cast<long>(d.height)) {
            std::fill(dst, dst + d.out_w, Real(0));
            continue;
          }
          const Real* src = x + (c * d.height + static_cast<std::size_t>(ih)) * d.width;
          const Span v = valid_outputs(kw, g.pad_w, g.stride_w, d.width, d.out_w);
          std::fill(dst, dst + v.lo, Real(0));
          const Real* base = src + v.lo * g.stride_w + kw - g.pad_w;
          if (g.stride_w == 1) {
            std::copy(base, base + (v.hi - v.lo), dst + v.lo);
          } else {
            for (std::size_t ow = v.lo; ow < v.hi; ++ow) dst[ow] = base[(ow - v.lo) * g.stride_w];
          }
          std::fill(dst + v.hi, dst + d.out_w, Real(0));
        }
      }
    }
  }
  return col;
}

template <typename Real>
void col2im(const RowMatrix<Real>& col, const ConvDims& d, const Conv2dGeometry& g, Real* x) {
  const std::size_t cols = d.out_h * d.out_w;
  for (std::size_t c = 0; c < d.channels; ++c) {
    for (std::size_t kh = 0; kh < d.kernel_h; ++kh) {
      for (std::size_t kw = 0; kw < d.kernel_w; ++kw) {
        const Real* row = col.data() + ((c * d.kernel_h + kh) * d.kernel_w + kw) * cols;
        for (std::size_t oh = 0; oh < d.out_h; ++oh) {
          const long ih = static_cast<long>(oh * g.stride_h + kh) - static_cast<long>(g.pad_h);
          if (ih < 0 || ih >= static_cast<long>(d.height)) continue;
          Real* dst = x + (c * d.height + static_cast<std::size_t>(ih)) * d.width;
          const Real* src = row + oh * d.out_w;
          const Span v = valid_outputs(kw, g.pad_w, g.stride_w, d.width, d.out_w);
          Real* base = dst + v.lo * g.stride_w + kw - g.pad_w;
          for (std::size_t ow = v.lo; ow < v.hi; ++ow) base[(ow - v.lo) * g.stride_w] += src[ow];
        }
      }
    }
  }
}

}  // namespace

template <typename Real>
Tensor<Real> conv2d_forward(const Tensor<Real>& input, const Tensor<Real>& weight,
                            const Conv2dGeometry& g) {
  const ConvDims d = conv_dims(input.shape(), weight.shape(), g);
  const std::size_t out_channels = weight.dim(0);
  const RowMatrix<Real> col = im2col(input.data().data(), d, g);
  Eigen::Map<const RowMatrix<Real>> w(weight.data().data(), out_channels, col.rows());
  Tensor<Real> out(Shape{out_channels, d.out_h, d.out_w});
  Eigen::Map<RowMatrix<Real>> y(out.data().data(), out_channels, col.cols());
  y.noalias() = w * col;
  return out;
}

template <typename Real>
Tensor<Real> conv2d_backward_input(const Tensor<Real>& grad_output, const Tensor<Real>& weight,
                                   const Shape& input_shape, const Conv2dGeometry& g) {
  const ConvDims d = conv_dims(input_shape, weight.shape(), g);
  const std::size_t out_channels = weight.dim(0);
  const std::size_t rows = d.channels * d.kernel_h * d.kernel_w;
  Eigen::Map<const RowMatrix<Real>> w(weight.data().data(), out_channels, rows);
  Eigen::Map<const RowMatrix<Real>> gy(grad_output.data().data(), out_channels,
                                       d.out_h * d.out_w);
  RowMatrix<Real> col = w.transpose() * gy;
  Tensor<Real> grad(input_shape);
  col2im(col, d, g, grad.data().data());
  return grad;
}

template <typename Real>
Tensor<Real> conv2d_backward_weight(const Tensor<Real>& input, const Tensor<Real>& grad_output,
                                    const Shape& weight_shape, const Conv2dGeometry& g) {
  const ConvDims d = conv_dims(input.shape(), weight_shape, g);
  const std::size_t out_channels = weight_shape[0];
  const RowMatrix<Real> col = im2col(input.data().data(), d, g);
  Eigen::Map<const RowMatrix<Real>> gy(grad_output.data().data(), out_channels, col.cols());
  Tensor<Real> grad(weight_shape);
  Eigen::Map<RowMatrix<Real>> gw(grad.data().data(), out_channels, col.rows());
  gw.noalias() = gy * col.transpose();
  return grad;
}

template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, bool transpose_a, const Tensor<Real>& b,
                    bool transpose_b) {
  Eigen::Map<const RowMatrix<Real>> ma(a.data().data(), a.dim(0), a.dim(1));
  Eigen::Map<const RowMatrix<Real>> mb(b.data().data(), b.dim(0), b.dim(1));
  const std::size_t rows = transpose_a ? a.dim(1) : a.dim(0);
  const std::size_t cols = transpose_b ? b.dim(0) : b.dim(1);
  Tensor<Real> out(Shape{rows, cols});
  Eigen::Map<RowMatrix<Real>> mo(out.data().data(), rows, cols);
  if (transpose_a && transpose_b) {
    mo.noalias() = ma.transpose() * mb.transpose();
  } else if (transpose_a) {
    mo.noalias() = ma.transpose() * mb;
  } else if (transpose_b) {
    mo.noalias() = ma * mb.transpose();
  } else {
    mo.noalias() = ma * mb;
  }
  return out;
}

#define EMOTRANS_INSTANTIATE_KERNELS(Real)                                                   \
  template Tensor<Real> conv2d_forward(const Tensor<Real>&, const Tensor<Real>&,            \
                                       const Conv2dGeometry&);                               \
  template Tensor<Real> conv2d_backward_input(const Tensor<Real>&, const Tensor<Real>&,     \
                                              const Shape&, const Conv2dGeometry&);          \
  template Tensor<Real> conv2d_backward_weight(const Tensor<Real>&, const Tensor<Real>&,    \
                                               const Shape&, const Conv2dGeometry&);         \
  template Tensor<Real> matmul(const Tensor<Real>&, bool, const Tensor<Real>&, bool);

EMOTRANS_INSTANTIATE_KERNELS(float)
EMOTRANS_INSTANTIATE_KERNELS(double)

}  // namespace emotrans::kernels
