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
#include <cstdint>
#include <functional>
#include <vector>

#include "emotrans/tape.h"

namespace emotrans {

struct GradCheckOptions {
  double step = 1e-5;
  /// 0 checks every coordinate; otherwise a seeded random subset of this size.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  /// max over checked coordinates of |analytic - numeric| / max(1, |analytic|)
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

/// Scalar function of several tensors, built on a fresh tape on each call.
using MultiScalarFunction =
    std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>& inputs)>;
using ScalarFunction = std::function<Var<double>(Tape<double>&, const Var<double>& input)>;

/// Compares reverse-mode gradients of `f` against central differences.
/// Non-finite intermediates surface as the tape's NumericError, which names
/// the offending op.
GradCheckResult grad_check(const MultiScalarFunction& f, const std::vector<Tensor<double>>& points,
                           const GradCheckOptions& options = {});

GradCheckResult grad_check(const ScalarFunction& f, const Tensor<double>& point,
                           const GradCheckOptions& options = {});

}  // namespace emotrans
