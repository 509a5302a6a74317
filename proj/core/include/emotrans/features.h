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
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "emotrans/tensor.h"

namespace emotrans {

/// Mel-cepstral coefficients per frame.
inline constexpr std::size_t kMcepDims = 24;
/// Training segment length in frames.
inline constexpr std::size_t kSegmentFrames = 128;

enum class Emotion { kAngry, kHappy, kSad, kNeutral };

std::string_view to_string(Emotion emotion);
Emotion parse_emotion(std::string_view name);

/// frames x 24 MCEP matrix plus the tags that travel with it in a manifest.
struct FeatureMatrix {
  Tensor<float> mcep;  // [frames, 24]
  int speaker_id = 0;
  Emotion emotion = Emotion::kNeutral;
  std::string language;

  std::size_t frames() const { return mcep.dim(0); }
  float at(std::size_t frame, std::size_t dim) const { return mcep[frame * kMcepDims + dim]; }
};

/// Builds a FeatureMatrix, checking the 24-column layout and finiteness.
FeatureMatrix make_feature_matrix(Tensor<float> mcep, int speaker_id = 0,
                                  Emotion emotion = Emotion::kNeutral, std::string language = {});

// ETGF binary format, little-endian:
//   "ETGF" | u32 version (1) | u32 frames | u32 dims (24) | f32[frames * dims]
void write_features(const FeatureMatrix& features, const std::filesystem::path& path);
/// Errors: FormatError (magic/version), ContractError (dims != 24),
/// IoError (missing file or truncated payload).
FeatureMatrix read_features(const std::filesystem::path& path);

struct ManifestEntry {
  std::string path;  // relative paths resolve against the manifest directory
  int speaker_id = 0;
  Emotion emotion = Emotion::kNeutral;
  std::string language;
};

struct DatasetManifest {
  std::vector<std::string> speakers;
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestEntry& entry) const;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Checks dense speaker ids, readable files, and a minimum length for every
/// recording. Raises ValidationError naming the first offending entry.
void validate_manifest(const DatasetManifest& manifest, std::size_t min_frames = kSegmentFrames);

/// Reads every entry, attaching the manifest tags.
std::vector<FeatureMatrix> load_corpus(const DatasetManifest& manifest);

struct NormalizationStats {
  std::vector<double> mean;  // 24
  std::vector<double> std;   // 24, floored at kStdFloor
  std::size_t sample_count = 0;

  static constexpr double kStdFloor = 1e-6;
};

/// Selects recordings by tag; unset fields match everything.
struct DomainFilter {
  std::optional<Emotion> emotion;
  std::optional<std::string> language;

  bool matches(const FeatureMatrix& features) const;
};

/// Per-dimension mean and population standard deviation over all frames of
/// the matching recordings. Needs at least two frames.
NormalizationStats fit_normalization(const std::vector<FeatureMatrix>& corpus,
                                     const DomainFilter& filter = {});
NormalizationStats fit_normalization(const DatasetManifest& manifest,
                                     const DomainFilter& filter = {});

FeatureMatrix apply_normalization(const FeatureMatrix& features, const NormalizationStats& stats);
FeatureMatrix invert_normalization(const FeatureMatrix& features, const NormalizationStats& stats);

/// Contiguous slice of `length` frames with a uniformly drawn start.
FeatureMatrix random_segment(const FeatureMatrix& features, std::size_t length,
                             std::mt19937_64& rng);
/// The centered slice of `length` frames (start = (frames - length) / 2).
FeatureMatrix center_segment(const FeatureMatrix& features, std::size_t length);
FeatureMatrix slice_frames(const FeatureMatrix& features, std::size_t start, std::size_t length);

/// [frames, 24] -> [24, frames]: MCEP dims become channels for the networks.
Tensor<float> to_channels_major(const FeatureMatrix& features);
/// Inverse of to_channels_major, copying tags from `tags`.
FeatureMatrix from_channels_major(const Tensor<float>& channels, const FeatureMatrix& tags);

// Synthetic two-domain corpus.

/// Statistics of the "language" a toy corpus is drawn from.
struct LanguageProfile {
  std::string tag = "src";
  std::uint64_t seed = 11;
  double offset_scale = 0.5;   // std of the per-language cepstral offset
  double min_freq_hz = 2.0;    // band of the latent trajectories
  double max_freq_hz = 8.0;

  friend bool operator==(const LanguageProfile&, const LanguageProfile&) = default;
};

/// Second toy language for transfer: its own offsets, mixing matrix and band.
inline LanguageProfile target_language() {
  LanguageProfile p;
  p.tag = "tgt";
  p.seed = 29;
  p.min_freq_hz = 3.0;
  p.max_freq_hz = 9.0;
  return p;
}

struct SynthConfig {
  std::size_t samples_per_domain = 50;
  std::size_t n_speakers = 4;
  std::size_t min_frames = 128;
  std::size_t max_frames = 256;
  double speaker_scale = 0.02;       // std of the per-speaker cepstral offset
  double speaker_gain_scale = 0.3;   // std of the per-speaker log gain of each trajectory
  double content_amplitude = 0.4;    // amplitude of each latent trajectory
  std::size_t trajectories = 3;      // latent sinusoids mixed into the 24 dims
  LanguageProfile language;
  Emotion emotion_a = Emotion::kNeutral;
  Emotion emotion_b = Emotion::kAngry;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// The fixed domain-B transform: +0.5 on dims 0-7, and 4 Hz amplitude
/// modulation of depth 0.3 on the dynamic part of dims 8-23. Frames are
/// taken at a nominal 200 frames per second.
struct EmotionTransform {
  static constexpr std::size_t kTiltDims = 8;
  static constexpr double kTilt = 0.5;
  static constexpr double kModulationHz = 4.0;
  static constexpr double kModulationDepth = 0.3;
  static constexpr double kFrameRate = 200.0;
};

struct SpeakerTable {
  std::vector<std::vector<double>> offsets;  // [K][24]
  std::vector<std::vector<double>> gains;    // [K][trajectories]
};

SpeakerTable draw_speakers(const SynthConfig& config, std::mt19937_64& rng);

/// One toy utterance. Two calls with identical rng state that differ only
/// in `apply_transform` differ by exactly the EmotionTransform.
FeatureMatrix synth_utterance(const SynthConfig& config, const SpeakerTable& speakers,
                              int speaker_id, bool apply_transform, std::mt19937_64& rng);

struct SynthDataset {
  DatasetManifest domain_a;
  DatasetManifest domain_b;
  std::filesystem::path manifest_a;
  std::filesystem::path manifest_b;
};

/// Writes `samples_per_domain` ETGF files per domain plus one manifest per
/// domain under `out_dir`. Domain contents are drawn independently (unpaired);
/// speakers are shared. Raises ContractError when n_speakers < 2.
SynthDataset synth_dataset(const SynthConfig& config, const std::filesystem::path& out_dir,
                           std::mt19937_64& rng);

}  // namespace emotrans
