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

#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "emotrans/features.h"
#include "test_util.h"

namespace emotrans {
namespace {

using testing::bit_identical;
using testing::TempDir;

FeatureMatrix random_features(std::size_t frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return make_feature_matrix(testing::uniform_tensor<float>({frames, kMcepDims}, rng, -3, 3));
}

void write_raw(const std::filesystem::path& path, const char magic[4], std::uint32_t version,
               std::uint32_t frames, std::uint32_t dims, std::size_t payload_floats) {
  std::ofstream os(path, std::ios::binary);
  os.write(magic, 4);
  for (std::uint32_t v : {version, frames, dims}) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  const std::vector<char> zeros(payload_floats * 4, 0);
  os.write(zeros.data(), static_cast<std::streamsize>(zeros.size()));
}

TEST(Etgf, RoundTripIsBitExact) {
  TempDir dir("etgf");
  const FeatureMatrix f = random_features(200, 1);
  write_features(f, dir / "a.etgf");
  const FeatureMatrix g = read_features(dir / "a.etgf");
  EXPECT_TRUE(bit_identical(f.mcep, g.mcep));
}

TEST(Etgf, HeaderIsLittleEndianAsDocumented) {
  TempDir dir("etgf");
  write_features(random_features(3, 2), dir / "a.etgf");
  std::ifstream is(dir / "a.etgf", std::ios::binary);
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(is)), {});
  ASSERT_EQ(b.size(), 16u + 3 * 24 * 4);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "ETGF");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[8], 3);
  EXPECT_EQ(b[12], 24);
}

TEST(Etgf, MalformedFilesUseTheirErrorClasses) {
  TempDir dir("etgf");
  write_raw(dir / "magic.etgf", "XXXX", 1, 2, 24, 48);
  EXPECT_THROW(read_features(dir / "magic.etgf"), FormatError);
  write_raw(dir / "version.etgf", "ETGF", 7, 2, 24, 48);
  EXPECT_THROW(read_features(dir / "version.etgf"), FormatError);
  write_raw(dir / "dims.etgf", "ETGF", 1, 2, 20, 40);
  EXPECT_THROW(read_features(dir / "dims.etgf"), ContractError);
  write_raw(dir / "short.etgf", "ETGF", 1, 300, 24, 100 * 24);
  EXPECT_THROW(read_features(dir / "short.etgf"), IoError);
  EXPECT_THROW(read_features(dir / "missing.etgf"), IoError);
}

TEST(Normalization, HandEvaluatedTwoFrames) {
  Tensor<float> m({2, kMcepDims});
  for (std::size_t d = 0; d < kMcepDims; ++d) m[kMcepDims + d] = 2.0f;
  const std::vector<FeatureMatrix> corpus{make_feature_matrix(m)};
  const NormalizationStats s = fit_normalization(corpus);
  for (std::size_t d = 0; d < kMcepDims; ++d) {
    EXPECT_DOUBLE_EQ(s.mean[d], 1.0);
    EXPECT_DOUBLE_EQ(s.std[d], 1.0);
  }
  const FeatureMatrix n = apply_normalization(corpus[0], s);
  EXPECT_FLOAT_EQ(n.at(0, 5), -1.0f);
  EXPECT_FLOAT_EQ(n.at(1, 5), 1.0f);
  EXPECT_EQ(s.sample_count, 2u);
}

TEST(Normalization, FittedCorpusIsStandardized) {
  std::vector<FeatureMatrix> corpus;
  for (int i = 0; i < 5; ++i) corpus.push_back(random_features(150 + i, 10 + i));
  const NormalizationStats s = fit_normalization(corpus);
  std::vector<FeatureMatrix> normalized;
  for (const auto& f : corpus) normalized.push_back(apply_normalization(f, s));
  for (std::size_t d = 0; d < kMcepDims; ++d) {
    double n = 0, m = 0, v = 0;
    for (const auto& f : normalized) {
      for (std::size_t t = 0; t < f.frames(); ++t) {
        m += f.at(t, d);
        ++n;
      }
    }
    m /= n;
    for (const auto& f : normalized) {
      for (std::size_t t = 0; t < f.frames(); ++t) v += (f.at(t, d) - m) * (f.at(t, d) - m);
    }
    EXPECT_NEAR(m, 0.0, 1e-6);
    EXPECT_NEAR(v / n, 1.0, 1e-4);
  }
  const NormalizationStats again = fit_normalization(normalized);
  for (std::size_t d = 0; d < kMcepDims; ++d) {
    EXPECT_NEAR(again.mean[d], 0.0, 1e-6);
    EXPECT_NEAR(again.std[d], 1.0, 1e-4);
  }
}

TEST(Normalization, ConstantDimensionIsFloored) {
  FeatureMatrix f = random_features(10, 3);
  for (std::size_t t = 0; t < 10; ++t) f.mcep[t * kMcepDims + 4] = 2.5f;
  const NormalizationStats s = fit_normalization(std::vector<FeatureMatrix>{f});
  EXPECT_EQ(s.std[4], NormalizationStats::kStdFloor);
  const FeatureMatrix n = apply_normalization(f, s);
  for (std::size_t t = 0; t < 10; ++t) EXPECT_EQ(n.at(t, 4), 0.0f);
}

TEST(Normalization, EmptyCorpusIsContractError) {
  EXPECT_THROW(fit_normalization(std::vector<FeatureMatrix>{}), ContractError);
  EXPECT_THROW(fit_normalization(std::vector<FeatureMatrix>{random_features(1, 4)}),
               ContractError);
}

TEST(Segment, WholeMatrixWhenExactlyLong) {
  const FeatureMatrix f = random_features(128, 5);
  std::mt19937_64 rng(0);
  EXPECT_TRUE(bit_identical(random_segment(f, 128, rng).mcep, f.mcep));
}

TEST(Segment, SeededStartRepeats) {
  const FeatureMatrix f = random_features(300, 6);
  std::mt19937_64 a(42), b(42);
  EXPECT_TRUE(bit_identical(random_segment(f, 128, a).mcep, random_segment(f, 128, b).mcep));
}

TEST(Segment, StartsCoverTheWholeRange) {
  FeatureMatrix f = random_features(130, 7);
  for (std::size_t t = 0; t < 130; ++t) f.mcep[t * kMcepDims] = static_cast<float>(t);
  std::mt19937_64 rng(1);
  std::set<float> starts;
  for (int i = 0; i < 200; ++i) starts.insert(random_segment(f, 128, rng).at(0, 0));
  EXPECT_EQ(starts, (std::set<float>{0, 1, 2}));
}

TEST(Manifest, ShortRecordingIsRejectedByName) {
  TempDir dir("manifest");
  write_features(random_features(100, 8), dir / "short.etgf");
  write_features(random_features(200, 9), dir / "long.etgf");
  DatasetManifest m;
  m.speakers = {"a", "b"};
  m.entries = {{"long.etgf", 0, Emotion::kNeutral, "src"}, {"short.etgf", 1, Emotion::kNeutral, "src"}};
  write_manifest(m, dir / "m.json");
  const DatasetManifest back = read_manifest(dir / "m.json");
  ASSERT_EQ(back.entries.size(), 2u);
  try {
    validate_manifest(back);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("short.etgf"), std::string::npos) << e.what();
  }
}

TEST(Manifest, SparseSpeakerIdsAreRejected) {
  TempDir dir("manifest");
  write_features(random_features(200, 9), dir / "x.etgf");
  DatasetManifest m;
  m.speakers = {"a", "b", "c"};
  m.entries = {{"x.etgf", 0, Emotion::kNeutral, "src"}, {"x.etgf", 2, Emotion::kNeutral, "src"}};
  m.base_dir = dir.path();
  EXPECT_THROW(validate_manifest(m), ValidationError);
}

TEST(Synth, SeededCallsAreBitIdentical) {
  TempDir a("synth"), b("synth");
  SynthConfig c;
  c.samples_per_domain = 6;
  std::mt19937_64 ra(9), rb(9);
  const SynthDataset da = synth_dataset(c, a.path(), ra);
  const SynthDataset db = synth_dataset(c, b.path(), rb);
  ASSERT_EQ(da.domain_a.entries.size(), db.domain_a.entries.size());
  for (std::size_t i = 0; i < da.domain_a.entries.size(); ++i) {
    EXPECT_TRUE(bit_identical(read_features(da.domain_a.resolve(da.domain_a.entries[i])).mcep,
                              read_features(db.domain_a.resolve(db.domain_a.entries[i])).mcep));
    EXPECT_TRUE(bit_identical(read_features(da.domain_b.resolve(da.domain_b.entries[i])).mcep,
                              read_features(db.domain_b.resolve(db.domain_b.entries[i])).mcep));
  }
}

TEST(Synth, DefaultCorpusLayout) {
  TempDir dir("synth");
  SynthConfig c;
  std::mt19937_64 rng(1);
  const SynthDataset ds = synth_dataset(c, dir.path(), rng);
  EXPECT_EQ(ds.domain_a.entries.size() + ds.domain_b.entries.size(), 100u);
  std::set<int> ids;
  for (const auto& e : ds.domain_a.entries) ids.insert(e.speaker_id);
  EXPECT_EQ(ids, (std::set<int>{0, 1, 2, 3}));
  validate_manifest(read_manifest(ds.manifest_a));
  validate_manifest(read_manifest(ds.manifest_b));
}

TEST(Synth, DomainShiftOnTiltDims) {
  SynthConfig c;
  std::mt19937_64 rng(3);
  const SpeakerTable speakers = draw_speakers(c, rng);
  for (int speaker = 0; speaker < 4; ++speaker) {
    std::mt19937_64 ra(100 + speaker), rb(100 + speaker);
    const FeatureMatrix a = synth_utterance(c, speakers, speaker, false, ra);
    const FeatureMatrix b = synth_utterance(c, speakers, speaker, true, rb);
    ASSERT_EQ(a.frames(), b.frames());
    for (std::size_t d = 0; d < EmotionTransform::kTiltDims; ++d) {
      double shift = 0;
      for (std::size_t t = 0; t < a.frames(); ++t) shift += b.at(t, d) - a.at(t, d);
      EXPECT_NEAR(shift / static_cast<double>(a.frames()), 0.5, 0.05);
    }
  }
}

TEST(Synth, SingleSpeakerIsRefused) {
  TempDir dir("synth");
  SynthConfig c;
  c.n_speakers = 1;
  std::mt19937_64 rng(1);
  EXPECT_THROW(synth_dataset(c, dir.path(), rng), ContractError);
}

TEST(Synth, TargetLanguageDiffersFromSource) {
  const LanguageProfile src;
  const LanguageProfile tgt = target_language();
  EXPECT_NE(src.tag, tgt.tag);
  EXPECT_NE(src.seed, tgt.seed);
}

}  // namespace
}  // namespace emotrans
