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
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "emotrans/evaluation.h"
#include "emotrans/features.h"
#include "emotrans/networks.h"
#include "emotrans/training.h"

namespace emotrans {

using Json = nlohmann::ordered_json;

// JSON forms of the individual configs. Readers reject unknown keys and
// wrong types with ValidationError naming the dotted key; absent keys keep
// their defaults.
Json to_json(const GeneratorConfig& c);
Json to_json(const CriticConfig& c);
Json to_json(const ClassifierConfig& c);
Json to_json(const TrainingConfig& c);
Json to_json(const SynthConfig& c);
Json to_json(const NormalizationStats& s);

void from_json(const Json& j, GeneratorConfig& c, std::string_view where = "generator");
void from_json(const Json& j, CriticConfig& c, std::string_view where = "critic");
void from_json(const Json& j, ClassifierConfig& c, std::string_view where = "classifier");
void from_json(const Json& j, TrainingConfig& c, std::string_view where = "training");
void from_json(const Json& j, SynthConfig& c, std::string_view where = "synth");
void from_json(const Json& j, NormalizationStats& s, std::string_view where = "stats");

/// One row of the ablation table.
struct AblationPreset {
  std::string_view name;
  AblationFlags flags;
  AdversarialKind adversarial;
};

/// cycle_only, cycle_li, cycle_sv, cycle_li_sv, cycle_li_sv_clip, full.
std::span<const AblationPreset> ablation_presets();
/// ValidationError for an unknown name.
const AblationPreset& find_ablation(std::string_view name);
void apply_ablation(TrainingConfig& config, const AblationPreset& preset);

struct EvaluationSettings {
  EmbedderKind embedder = EmbedderKind::kIdentity;

  friend bool operator==(const EvaluationSettings&, const EvaluationSettings&) = default;
};

/// Everything one CLI command needs. Paths may be empty when a command does
/// not use them.
struct RunConfig {
  std::uint64_t seed = 0;
  GeneratorConfig generator = GeneratorConfig::desk();
  CriticConfig critic = CriticConfig::desk();
  ClassifierConfig classifier = ClassifierConfig::desk();
  TrainingConfig training;
  SynthConfig synth;
  EvaluationSettings evaluation;
  std::filesystem::path manifest_x;
  std::filesystem::path manifest_y;
  std::filesystem::path out_dir;
  // Optional: write timing into the metrics log (off makes logs comparable
  // byte for byte).
  bool metrics_wall_time = true;

  /// Checks every nested config; ValidationError on the first problem.
  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

Json to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j);
/// Missing file -> IoError, malformed JSON -> ValidationError. Relative paths
/// resolve against the file's directory.
RunConfig read_run_config(const std::filesystem::path& path);
/// Writes the fully materialized config (every default spelled out). Paths
/// under the file's directory are written relative to it.
void write_run_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace emotrans
