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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "emotrans/config.h"

namespace emotrans::cli {

/// Bad flag combinations found after parsing; exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> iterations;
  std::filesystem::path out;
  std::filesystem::path manifest_x;
  std::filesystem::path manifest_y;
};

/// Config file (or defaults) with command-line overrides applied.
RunConfig load_config(const CommonOptions& options);

struct SynthOptions {
  std::string language = "src";
};

struct TrainOptions {
  std::string ablation;
  std::filesystem::path resume;
  std::filesystem::path source;  // transfer only
};

struct GenerateOptions {
  std::filesystem::path checkpoint;
  std::string direction;
  std::filesystem::path input;
  std::filesystem::path output;
};

struct EvaluateOptions {
  std::filesystem::path real;
  std::filesystem::path generated;
  std::string embedder;
  std::string metric = "fad";
  std::filesystem::path checkpoint;
};

// Each command writes its machine-readable result to `out` and diagnostics
// to stderr. The return value is the process exit code.
int cmd_synth_data(const CommonOptions& common, const SynthOptions& options, std::ostream& out);
int cmd_train(const CommonOptions& common, const TrainOptions& options, std::ostream& out);
int cmd_transfer(const CommonOptions& common, const TrainOptions& options, std::ostream& out);
int cmd_generate(const GenerateOptions& options, std::ostream& out);
int cmd_evaluate(const EvaluateOptions& options, std::ostream& out);
int cmd_grad_check(std::uint64_t seed, std::ostream& out);
int cmd_ablate(const CommonOptions& common, std::ostream& out);

}  // namespace emotrans::cli
