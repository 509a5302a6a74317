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

#include <filesystem>

#include "emotrans/config.h"
#include "emotrans/training.h"

namespace emotrans {

/// A trainer snapshot with the configs that built it.
struct Checkpoint {
  GeneratorConfig generator;
  CriticConfig critic;
  ClassifierConfig classifier;
  TrainingConfig training;
  TrainerState state;
};

// ETGC layout, little-endian:
//   "ETGC" | u32 version (1) | u64 header bytes | JSON header | f32 payload
// The header holds the configs, iteration, sampling-stream state,
// normalization stats and, per network, the Adam step count and the
// parameter name/shape table. The payload lists, per network in header
// order, all parameter values, then the first moments, then the second.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
void save_checkpoint(const GeneratorConfig& generator, const CriticConfig& critic,
                     const ClassifierConfig& classifier, const TrainingConfig& training,
                     const TrainerState& state, const std::filesystem::path& path);

/// FormatError on bad magic, version or header; IoError on a missing or
/// truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every parameter and optimizer moment of `source` into `target`,
/// which must have the same parameter names and shapes. A missing, extra or
/// differently shaped parameter raises DimensionError naming it.
void restore_into(const TrainerState& source, TrainerState& target);

/// Loads plan.source_checkpoint and runs transfer_init on its models.
TrainerState transfer_init(const TransferPlan& plan, NormalizationStats target_stats);

}  // namespace emotrans
