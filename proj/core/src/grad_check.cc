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

#include "emotrans/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>

namespace emotrans {
namespace {

double evaluate(const MultiScalarFunction& f, const std::vector<Tensor<double>>& points) {
  Tape<double> tape;
  std::vector<Var<double>> inputs;
  for (const auto& p : points) inputs.push_back(tape.leaf(p, false));
  const Var<double> out = f(tape, inputs);
  if (out.value().size() != 1) {
    throw ContractError("grad_check: function must return a scalar, got shape " +
                        shape_to_string(out.shape()));
  }
  return out.value()[0];
}

}  // namespace

GradCheckResult grad_check(const MultiScalarFunction& f, const std::vector<Tensor<double>>& points,
                           const GradCheckOptions& options) {
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> inputs;
    for (const auto& p : points) inputs.push_back(tape.leaf(p, true));
    const Var<double> out = f(tape, inputs);
    analytic = tape.backward(out, inputs);
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t t = 0; t < points.size(); ++t) {
    for (std::size_t i = 0; i < points[t].size(); ++i) coords.emplace_back(t, i);
  }
  if (options.max_coordinates > 0 && options.max_coordinates < coords.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckResult result;
  std::vector<Tensor<double>> probe = points;
  for (const auto& [t, i] : coords) {
    const double original = probe[t][i];
    probe[t][i] = original + options.step;
    const double plus = evaluate(f, probe);
    probe[t][i] = original - options.step;
    const double minus = evaluate(f, probe);
    probe[t][i] = original;

    const double numeric = (plus - minus) / (2.0 * options.step);
    const double exact = analytic[t][i];
    const double err = std::abs(exact - numeric) / std::max(1.0, std::abs(exact));
    ++result.coordinates_checked;
    if (err > result.max_relative_error || result.coordinates_checked == 1) {
      result.max_relative_error = std::max(err, result.max_relative_error);
      result.worst_tensor = t;
      result.worst_index = i;
      result.worst_analytic = exact;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

GradCheckResult grad_check(const ScalarFunction& f, const Tensor<double>& point,
                           const GradCheckOptions& options) {
  return grad_check(
      [&f](Tape<double>& tape, const std::vector<Var<double>>& inputs) {
        return f(tape, inputs[0]);
      },
      std::vector<Tensor<double>>{point}, options);
}

}  // namespace emotrans
