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

#include "emotrans/features.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "emotrans/errors.h"

namespace emotrans {
namespace {

constexpr std::array<char, 4> kFeatureMagic{'E', 'T', 'G', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::ostream& os, float f) { put_u32(os, std::bit_cast<std::uint32_t>(f)); }

}  // namespace

std::string_view to_string(Emotion emotion) {
  switch (emotion) {
    case Emotion::kAngry: return "Angry";
    case Emotion::kHappy: return "Happy";
    case Emotion::kSad: return "Sad";
    case Emotion::kNeutral: return "Neutral";
  }
  return "Neutral";
}

Emotion parse_emotion(std::string_view name) {
  for (Emotion e : {Emotion::kAngry, Emotion::kHappy, Emotion::kSad, Emotion::kNeutral}) {
    if (to_string(e) == name) return e;
  }
  throw ValidationError("unknown emotion '" + std::string(name) +
                        "' (expected Angry, Happy, Sad or Neutral)");
}

FeatureMatrix make_feature_matrix(Tensor<float> mcep, int speaker_id, Emotion emotion,
                                  std::string language) {
  if (mcep.rank() != 2 || mcep.dim(1) != kMcepDims) {
    throw ContractError("feature matrix must be [frames, 24], got " +
                        shape_to_string(mcep.shape()));
  }
  if (!mcep.all_finite()) throw ValidationError("feature matrix contains non-finite values");
  FeatureMatrix out;
  out.mcep = std::move(mcep);
  out.speaker_id = speaker_id;
  out.emotion = emotion;
  out.language = std::move(language);
  return out;
}

void write_features(const FeatureMatrix& features, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(kFeatureMagic.data(), kFeatureMagic.size());
  put_u32(os, kFeatureVersion);
  put_u32(os, static_cast<std::uint32_t>(features.frames()));
  put_u32(os, static_cast<std::uint32_t>(kMcepDims));
  for (float v : features.mcep.data()) put_f32(os, v);
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open feature file '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 16) {
    throw IoError("'" + path.string() + "': truncated header (" + std::to_string(bytes.size()) +
                  " bytes)");
  }
  if (std::memcmp(bytes.data(), kFeatureMagic.data(), 4) != 0) {
    throw FormatError("'" + path.string() + "': bad magic, not an ETGF file");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kFeatureVersion) {
    throw FormatError("'" + path.string() + "': unsupported ETGF version " +
                      std::to_string(version));
  }
  const std::uint32_t frames = get_u32(bytes.data() + 8);
  const std::uint32_t dims = get_u32(bytes.data() + 12);
  if (dims != kMcepDims) {
    throw ContractError("'" + path.string() + "': expected 24 MCEP dims, header says " +
                        std::to_string(dims));
  }
  if (frames == 0) throw FormatError("'" + path.string() + "': zero frames");
  const std::size_t expected = static_cast<std::size_t>(frames) * dims * 4;
  if (bytes.size() - 16 < expected) {
    throw IoError("'" + path.string() + "': truncated payload, header claims " +
                  std::to_string(frames) + " frames (" + std::to_string(expected) +
                  " bytes) but " + std::to_string(bytes.size() - 16) + " bytes present");
  }
  Tensor<float> mcep(Shape{frames, dims});
  for (std::size_t i = 0; i < mcep.size(); ++i) {
    mcep[i] = std::bit_cast<float>(get_u32(bytes.data() + 16 + 4 * i));
  }
  if (!mcep.all_finite()) {
    throw ValidationError("'" + path.string() + "': payload contains non-finite values");
  }
  return make_feature_matrix(std::move(mcep));
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& entry) const {
  std::filesystem::path p(entry.path);
  return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest '" + path.string() + "': " + e.what());
  }
  DatasetManifest manifest;
  manifest.base_dir = path.parent_path();
  try {
    for (const auto& s : doc.at("speakers")) manifest.speakers.push_back(s.get<std::string>());
    for (const auto& e : doc.at("entries")) {
      ManifestEntry entry;
      entry.path = e.at("path").get<std::string>();
      entry.speaker_id = e.at("speaker_id").get<int>();
      entry.emotion = parse_emotion(e.at("emotion").get<std::string>());
      entry.language = e.at("language").get<std::string>();
      manifest.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest '" + path.string() + "': " + e.what());
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["speakers"] = manifest.speakers;
  doc["entries"] = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    doc["entries"].push_back({{"path", e.path},
                              {"speaker_id", e.speaker_id},
                              {"emotion", std::string(to_string(e.emotion))},
                              {"language", e.language}});
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << doc.dump(2) << '\n';
}

void validate_manifest(const DatasetManifest& manifest, std::size_t min_frames) {
  if (manifest.entries.empty()) throw ValidationError("manifest has no entries");
  const int k = static_cast<int>(manifest.speakers.size());
  std::vector<bool> seen(manifest.speakers.size(), false);
  for (const auto& entry : manifest.entries) {
    if (entry.speaker_id < 0 || entry.speaker_id >= k) {
      throw ValidationError("'" + entry.path + "': speaker_id " + std::to_string(entry.speaker_id) +
                            " outside [0, " + std::to_string(k) + ")");
    }
    seen[static_cast<std::size_t>(entry.speaker_id)] = true;
    const auto file = manifest.resolve(entry);
    if (!std::filesystem::exists(file)) {
      throw ValidationError("'" + file.string() + "': referenced feature file does not exist");
    }
    FeatureMatrix features;
    try {
      features = read_features(file);
    } catch (const Error& e) {
      throw ValidationError(std::string("invalid feature file: ") + e.what());
    }
    if (features.frames() < min_frames) {
      throw ValidationError("'" + file.string() + "': " + std::to_string(features.frames()) +
                            " frames, need at least " + std::to_string(min_frames));
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw ValidationError("speaker ids not dense: speaker " + std::to_string(i) + " ('" +
                            manifest.speakers[i] + "') has no entries");
    }
  }
}

std::vector<FeatureMatrix> load_corpus(const DatasetManifest& manifest) {
  std::vector<FeatureMatrix> corpus;
  corpus.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    FeatureMatrix features = read_features(manifest.resolve(entry));
    features.speaker_id = entry.speaker_id;
    features.emotion = entry.emotion;
    features.language = entry.language;
    corpus.push_back(std::move(features));
  }
  return corpus;
}

bool DomainFilter::matches(const FeatureMatrix& features) const {
  if (emotion && features.emotion != *emotion) return false;
  if (language && features.language != *language) return false;
  return true;
}

NormalizationStats fit_normalization(const std::vector<FeatureMatrix>& corpus,
                                     const DomainFilter& filter) {
  NormalizationStats stats;
  stats.mean.assign(kMcepDims, 0.0);
  stats.std.assign(kMcepDims, 0.0);
  for (const auto& f : corpus) {
    if (!filter.matches(f)) continue;
    stats.sample_count += f.frames();
    for (std::size_t t = 0; t < f.frames(); ++t) {
      for (std::size_t d = 0; d < kMcepDims; ++d) stats.mean[d] += f.at(t, d);
    }
  }
  if (stats.sample_count < 2) {
    throw ContractError("fit_normalization needs at least 2 frames, corpus has " +
                        std::to_string(stats.sample_count));
  }
  const double n = static_cast<double>(stats.sample_count);
  for (double& m : stats.mean) m /= n;
  for (const auto& f : corpus) {
    if (!filter.matches(f)) continue;
    for (std::size_t t = 0; t < f.frames(); ++t) {
      for (std::size_t d = 0; d < kMcepDims; ++d) {
        const double dev = f.at(t, d) - stats.mean[d];
        stats.std[d] += dev * dev;
      }
    }
  }
  for (double& s : stats.std) s = std::max(std::sqrt(s / n), NormalizationStats::kStdFloor);
  return stats;
}

NormalizationStats fit_normalization(const DatasetManifest& manifest, const DomainFilter& filter) {
  return fit_normalization(load_corpus(manifest), filter);
}

FeatureMatrix apply_normalization(const FeatureMatrix& features, const NormalizationStats& stats) {
  FeatureMatrix out = features;
  for (std::size_t t = 0; t < out.frames(); ++t) {
    for (std::size_t d = 0; d < kMcepDims; ++d) {
      float& v = out.mcep[t * kMcepDims + d];
      v = static_cast<float>((v - stats.mean[d]) / stats.std[d]);
    }
  }
  return out;
}

FeatureMatrix invert_normalization(const FeatureMatrix& features, const NormalizationStats& stats) {
  FeatureMatrix out = features;
  for (std::size_t t = 0; t < out.frames(); ++t) {
    for (std::size_t d = 0; d < kMcepDims; ++d) {
      float& v = out.mcep[t * kMcepDims + d];
      v = static_cast<float>(v * stats.std[d] + stats.mean[d]);
    }
  }
  return out;
}

FeatureMatrix slice_frames(const FeatureMatrix& features, std::size_t start, std::size_t length) {
  if (length == 0 || start + length > features.frames()) {
    throw ContractError("frame slice [" + std::to_string(start) + ", " +
                        std::to_string(start + length) + ") outside " +
                        std::to_string(features.frames()) + " frames");
  }
  auto src = features.mcep.data();
  std::vector<float> data(src.begin() + start * kMcepDims,
                          src.begin() + (start + length) * kMcepDims);
  FeatureMatrix out = features;
  out.mcep = Tensor<float>(Shape{length, kMcepDims}, std::move(data));
  return out;
}

FeatureMatrix random_segment(const FeatureMatrix& features, std::size_t length,
                             std::mt19937_64& rng) {
  if (features.frames() < length) {
    throw ValidationError("recording has " + std::to_string(features.frames()) +
                          " frames, shorter than the " + std::to_string(length) +
                          "-frame segment");
  }
  std::uniform_int_distribution<std::size_t> start(0, features.frames() - length);
  return slice_frames(features, start(rng), length);
}

FeatureMatrix center_segment(const FeatureMatrix& features, std::size_t length) {
  if (features.frames() < length) {
    throw ValidationError("recording has " + std::to_string(features.frames()) +
                          " frames, shorter than the " + std::to_string(length) +
                          "-frame segment");
  }
  return slice_frames(features, (features.frames() - length) / 2, length);
}

Tensor<float> to_channels_major(const FeatureMatrix& features) {
  const std::size_t frames = features.frames();
  Tensor<float> out(Shape{kMcepDims, frames});
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t d = 0; d < kMcepDims; ++d) out[d * frames + t] = features.at(t, d);
  }
  return out;
}

FeatureMatrix from_channels_major(const Tensor<float>& channels, const FeatureMatrix& tags) {
  if (channels.rank() != 2 || channels.dim(0) != kMcepDims) {
    throw DimensionError("expected [24, frames], got " + shape_to_string(channels.shape()));
  }
  const std::size_t frames = channels.dim(1);
  Tensor<float> mcep(Shape{frames, kMcepDims});
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t d = 0; d < kMcepDims; ++d) mcep[t * kMcepDims + d] = channels[d * frames + t];
  }
  return make_feature_matrix(std::move(mcep), tags.speaker_id, tags.emotion, tags.language);
}

SpeakerTable draw_speakers(const SynthConfig& config, std::mt19937_64& rng) {
  if (config.n_speakers < 2) {
    throw ContractError("synthetic corpus needs at least 2 speakers for the speaker classifier, got " +
                        std::to_string(config.n_speakers));
  }
  std::normal_distribution<double> normal(0.0, config.speaker_scale);
  SpeakerTable table;
  table.offsets.resize(config.n_speakers);
  for (auto& offset : table.offsets) {
    offset.resize(kMcepDims);
    for (double& v : offset) v = normal(rng);
  }
  std::normal_distribution<double> log_gain(0.0, config.speaker_gain_scale);
  table.gains.assign(config.n_speakers, std::vector<double>(config.trajectories));
  for (auto& gains : table.gains) {
    for (double& g : gains) g = std::exp(log_gain(rng));
  }
  return table;
}

namespace {

struct LanguageTables {
  std::vector<double> offset;               // [24]
  std::vector<std::vector<double>> mixing;  // [24][trajectories]
};

// Fixed per language: a cepstral offset and the matrix that spreads the
// latent trajectories over the 24 dims.
LanguageTables language_tables(const LanguageProfile& profile, std::size_t trajectories) {
  std::mt19937_64 rng(profile.seed);
  std::normal_distribution<double> normal(0.0, profile.offset_scale);
  LanguageTables t;
  t.offset.resize(kMcepDims);
  for (double& v : t.offset) v = normal(rng);
  std::normal_distribution<double> unit(0.0, 1.0 / std::sqrt(static_cast<double>(trajectories)));
  t.mixing.assign(kMcepDims, std::vector<double>(trajectories));
  for (auto& row : t.mixing) {
    for (double& v : row) v = unit(rng);
  }
  return t;
}

}  // namespace

FeatureMatrix synth_utterance(const SynthConfig& config, const SpeakerTable& speakers,
                              int speaker_id, bool apply_transform, std::mt19937_64& rng) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (config.trajectories == 0) throw ContractError("synthetic corpus needs at least 1 trajectory");
  const auto& speaker = speakers.offsets.at(static_cast<std::size_t>(speaker_id));
  const auto& gains = speakers.gains.at(static_cast<std::size_t>(speaker_id));
  const LanguageTables lang = language_tables(config.language, config.trajectories);

  std::uniform_int_distribution<std::size_t> length(config.min_frames, config.max_frames);
  std::uniform_real_distribution<double> freq(config.language.min_freq_hz,
                                              config.language.max_freq_hz);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);

  const std::size_t frames = length(rng);
  struct Partial {
    double freq, phase;
  };
  std::vector<Partial> latent(config.trajectories);
  for (auto& p : latent) {
    p.freq = freq(rng);
    p.phase = phase(rng);
  }
  const double modulation_phase = phase(rng);

  Tensor<float> mcep(Shape{frames, kMcepDims});
  std::vector<double> z(config.trajectories);
  for (std::size_t t = 0; t < frames; ++t) {
    const double seconds = static_cast<double>(t) / EmotionTransform::kFrameRate;
    const double modulation =
        1.0 + EmotionTransform::kModulationDepth *
                  std::sin(kTwoPi * EmotionTransform::kModulationHz * seconds + modulation_phase);
    for (std::size_t k = 0; k < latent.size(); ++k) {
      z[k] = gains[k] * config.content_amplitude * std::sin(kTwoPi * latent[k].freq * seconds + latent[k].phase);
    }
    for (std::size_t d = 0; d < kMcepDims; ++d) {
      double content = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) content += lang.mixing[d][k] * z[k];
      double value = lang.offset[d] + speaker[d];
      if (apply_transform) {
        if (d < EmotionTransform::kTiltDims) {
          value += EmotionTransform::kTilt + content;
        } else {
          value += content * modulation;
        }
      } else {
        value += content;
      }
      mcep[t * kMcepDims + d] = static_cast<float>(value);
    }
  }
  return make_feature_matrix(std::move(mcep), speaker_id, Emotion::kNeutral, config.language.tag);
}

SynthDataset synth_dataset(const SynthConfig& config, const std::filesystem::path& out_dir,
                           std::mt19937_64& rng) {
  if (config.min_frames < kSegmentFrames || config.max_frames < config.min_frames) {
    throw ContractError("synthetic frame range must lie within [128, ...] and be non-empty");
  }
  if (config.samples_per_domain < 2) {
    throw ContractError("synthetic corpus needs at least 2 samples per domain");
  }
  const SpeakerTable speakers = draw_speakers(config, rng);
  std::filesystem::create_directories(out_dir / "a");
  std::filesystem::create_directories(out_dir / "b");

  SynthDataset result;
  for (std::size_t k = 0; k < config.n_speakers; ++k) {
    const std::string name = config.language.tag + "_spk" + std::to_string(k);
    result.domain_a.speakers.push_back(name);
    result.domain_b.speakers.push_back(name);
  }
  result.domain_a.base_dir = out_dir;
  result.domain_b.base_dir = out_dir;

  // Round-robin speaker assignment keeps ids dense for any sample count >= K.
  auto build = [&](DatasetManifest& manifest, const char* sub, Emotion emotion, bool transform) {
    for (std::size_t i = 0; i < config.samples_per_domain; ++i) {
      const int speaker = static_cast<int>(i % config.n_speakers);
      FeatureMatrix features = synth_utterance(config, speakers, speaker, transform, rng);
      features.emotion = emotion;
      char name[32];
      std::snprintf(name, sizeof(name), "%s/%04zu.etgf", sub, i);
      write_features(features, out_dir / name);
      manifest.entries.push_back({name, speaker, emotion, config.language.tag});
    }
  };
  build(result.domain_a, "a", config.emotion_a, false);
  build(result.domain_b, "b", config.emotion_b, true);

  result.manifest_a = out_dir / "domain_a.json";
  result.manifest_b = out_dir / "domain_b.json";
  write_manifest(result.domain_a, result.manifest_a);
  write_manifest(result.domain_b, result.manifest_b);
  return result;
}

}  // namespace emotrans
