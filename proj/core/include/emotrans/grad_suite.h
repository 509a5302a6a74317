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
#include <string>
#include <vector>

namespace emotrans {

struct GradSuiteEntry {
  std::string name;
  std::string group;  // "op" or "loss"
  double tolerance = 0;
  double max_relative_error = 0;  // worst over all points
  std::size_t points = 0;
  std::size_t coordinates = 0;

  bool passed() const { return max_relative_error < tolerance; }
};

struct GradSuiteOptions {
  std::uint64_t seed = 0;
  std::size_t op_points = 20;
  std::size_t loss_points = 3;
  // Per loss point, a random subset of network parameters is checked.
  std::size_t loss_coordinates = 120;
};

/// 64-bit central-difference checks (step 1e-5) of every differentiable op
/// (tolerance 1e-5) and of the composed losses on small networks (1e-4),
/// including the double-backward gradient penalty. Random points keep
/// kinked ops at least 1e-3 away from their kink.
std::vector<GradSuiteEntry> run_grad_suite(const GradSuiteOptions& options = {});

}  // namespace emotrans
