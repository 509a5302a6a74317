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
#include <string_view>
#include <vector>

#include "emotrans/features.h"
#include "emotrans/networks.h"

namespace emotrans {

/// Gaussian fit of a set of embeddings. `cov` is d x d, row-major.
struct EmbeddingStats {
  std::vector<double> mean;
  std::vector<double> cov;
  std::size_t count = 0;

  std::size_t dim() const { return mean.size(); }
};

/// Sample mean and 1/(n-1) covariance, symmetrized. Rows must share one
/// length; fewer than two rows is a ContractError.
EmbeddingStats fit_gaussian(const std::vector<std::vector<double>>& rows);

/// Principal square root of a symmetric PSD matrix (d x d, row-major) by
/// eigendecomposition, negative eigenvalues clamped to 0.
std::vector<double> sqrtm_psd(const std::vector<double>& matrix, std::size_t d);

/// |mu_a - mu_b|^2 + Tr(Sa + Sb - 2 (Sa Sb)^1/2), with the cross term taken
/// as Tr sqrtm(sqrtm(Sa) Sb sqrtm(Sa)). Clamped to >= 0.
double frechet_distance(const EmbeddingStats& a, const EmbeddingStats& b);

enum class EmbedderKind { kIdentity, kClassifier };

std::string_view to_string(EmbedderKind kind);
EmbedderKind parse_embedder_kind(std::string_view name);

/// Maps a raw-space recording to a fixed-length vector from its centered
/// 128-frame crop (the whole recording when shorter).
///   identity:   time mean of each of the 24 dims
///   classifier: bottleneck activation of the speaker classifier on the
///               normalized crop
class Embedder {
 public:
  static Embedder identity();
  static Embedder classifier(const Classifier<float>& classifier, const NormalizationStats& stats);

  EmbedderKind kind() const { return kind_; }
  std::size_t dim() const;
  std::vector<double> embed(const FeatureMatrix& features) const;

 private:
  EmbedderKind kind_ = EmbedderKind::kIdentity;
  const Classifier<float>* classifier_ = nullptr;
  const NormalizationStats* stats_ = nullptr;
};

/// Frechet distance between Gaussian fits of the two embedded sets.
double fad(const std::vector<FeatureMatrix>& real, const std::vector<FeatureMatrix>& generated,
           const Embedder& embedder);

/// Mean over frames of (10 / ln 10) * sqrt(2 * sum_d (a_d - b_d)^2), in dB.
/// Frame counts must match.
double mcd(const FeatureMatrix& reference, const FeatureMatrix& test);

/// Raw features through a generator: normalize, convert (any length), and
/// map back to raw space. Frame count and tags are preserved.
FeatureMatrix convert_features(const Generator<float>& generator, const FeatureMatrix& features,
                               const NormalizationStats& stats);

std::vector<FeatureMatrix> convert_corpus(const Generator<float>& generator,
                                          const std::vector<FeatureMatrix>& corpus,
                                          const NormalizationStats& stats);

/// Fraction of recordings whose classifier argmax equals their speaker id.
double speaker_accuracy(const Classifier<float>& classifier,
                        const std::vector<FeatureMatrix>& corpus, const NormalizationStats& stats);

}  // namespace emotrans
