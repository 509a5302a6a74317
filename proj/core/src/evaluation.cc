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

#include "emotrans/evaluation.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "emotrans/errors.h"

namespace emotrans {
namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix to_matrix(const std::vector<double>& m, std::size_t d) {
  if (m.size() != d * d) {
    throw ContractError("matrix has " + std::to_string(m.size()) + " entries, expected " +
                        std::to_string(d * d));
  }
  return Eigen::Map<const Matrix>(m.data(), static_cast<Eigen::Index>(d),
                                  static_cast<Eigen::Index>(d));
}

Matrix sqrtm(const Matrix& a) {
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eigendecomposition did not converge (d=" << a.rows()
        << ", max |entry|=" << sym.cwiseAbs().maxCoeff() << ")";
    throw NumericError(msg.str());
  }
  const Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

FeatureMatrix center_crop(const FeatureMatrix& f) {
  return f.frames() <= kSegmentFrames ? f : center_segment(f, kSegmentFrames);
}

}  // namespace

EmbeddingStats fit_gaussian(const std::vector<std::vector<double>>& rows) {
  if (rows.size() < 2) {
    throw ContractError("fit_gaussian needs at least 2 rows, got " + std::to_string(rows.size()));
  }
  const std::size_t d = rows[0].size();
  if (d == 0) throw ContractError("fit_gaussian: zero-dimensional embeddings");
  EmbeddingStats s;
  s.count = rows.size();
  s.mean.assign(d, 0.0);
  for (const auto& r : rows) {
    if (r.size() != d) throw ContractError("fit_gaussian: rows differ in length");
    for (std::size_t i = 0; i < d; ++i) s.mean[i] += r[i];
  }
  for (auto& m : s.mean) m /= static_cast<double>(s.count);
  s.cov.assign(d * d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) {
      const double di = r[i] - s.mean[i];
      for (std::size_t j = 0; j < d; ++j) s.cov[i * d + j] += di * (r[j] - s.mean[j]);
    }
  }
  const double norm = 1.0 / static_cast<double>(s.count - 1);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      const double v = 0.5 * (s.cov[i * d + j] + s.cov[j * d + i]) * norm;
      s.cov[i * d + j] = v;
      s.cov[j * d + i] = v;
    }
  }
  return s;
}

std::vector<double> sqrtm_psd(const std::vector<double>& matrix, std::size_t d) {
  const Matrix r = sqrtm(to_matrix(matrix, d));
  return std::vector<double>(r.data(), r.data() + r.size());
}

double frechet_distance(const EmbeddingStats& a, const EmbeddingStats& b) {
  const std::size_t d = a.dim();
  if (d == 0 || b.dim() != d) {
    throw ContractError("frechet_distance: dimensions " + std::to_string(a.dim()) + " and " +
                        std::to_string(b.dim()));
  }
  const Matrix sa = to_matrix(a.cov, d);
  const Matrix sb = to_matrix(b.cov, d);
  double mean_term = 0.0;
  for (std::size_t i = 0; i < d; ++i) mean_term += (a.mean[i] - b.mean[i]) * (a.mean[i] - b.mean[i]);
  const Matrix root_a = sqrtm(sa);
  const double cross = sqrtm(root_a * sb * root_a).trace();
  return std::max(0.0, mean_term + sa.trace() + sb.trace() - 2.0 * cross);
}

std::string_view to_string(EmbedderKind kind) {
  return kind == EmbedderKind::kIdentity ? "identity" : "classifier";
}

EmbedderKind parse_embedder_kind(std::string_view name) {
  if (name == "identity") return EmbedderKind::kIdentity;
  if (name == "classifier") return EmbedderKind::kClassifier;
  throw ValidationError("unknown embedder '" + std::string(name) +
                        "' (expected identity or classifier)");
}

Embedder Embedder::identity() { return Embedder{}; }

Embedder Embedder::classifier(const Classifier<float>& classifier,
                              const NormalizationStats& stats) {
  Embedder e;
  e.kind_ = EmbedderKind::kClassifier;
  e.classifier_ = &classifier;
  e.stats_ = &stats;
  return e;
}

std::size_t Embedder::dim() const {
  return kind_ == EmbedderKind::kIdentity ? kMcepDims : classifier_->config.embedding_dim;
}

std::vector<double> Embedder::embed(const FeatureMatrix& features) const {
  const FeatureMatrix crop = center_crop(features);
  if (kind_ == EmbedderKind::kIdentity) {
    std::vector<double> out(kMcepDims, 0.0);
    for (std::size_t t = 0; t < crop.frames(); ++t) {
      for (std::size_t d = 0; d < kMcepDims; ++d) out[d] += crop.at(t, d);
    }
    for (auto& v : out) v /= static_cast<double>(crop.frames());
    return out;
  }
  const Tensor<float> image = to_channels_major(apply_normalization(crop, *stats_))
                                  .reshaped(Shape{1, kMcepDims, crop.frames()});
  const Tensor<float> e = classifier_apply(*classifier_, image).embedding;
  return std::vector<double>(e.data().begin(), e.data().end());
}

double fad(const std::vector<FeatureMatrix>& real, const std::vector<FeatureMatrix>& generated,
           const Embedder& embedder) {
  auto embed_all = [&](const std::vector<FeatureMatrix>& set) {
    std::vector<std::vector<double>> rows;
    rows.reserve(set.size());
    for (const auto& f : set) rows.push_back(embedder.embed(f));
    return rows;
  };
  return frechet_distance(fit_gaussian(embed_all(real)), fit_gaussian(embed_all(generated)));
}

double mcd(const FeatureMatrix& reference, const FeatureMatrix& test) {
  if (reference.frames() != test.frames()) {
    throw ContractError("mcd needs equal frame counts, got " + std::to_string(reference.frames()) +
                        " and " + std::to_string(test.frames()));
  }
  const double k = 10.0 / std::numbers::ln10;
  double total = 0.0;
  for (std::size_t t = 0; t < reference.frames(); ++t) {
    double sq = 0.0;
    for (std::size_t d = 0; d < kMcepDims; ++d) {
      const double diff = static_cast<double>(reference.at(t, d)) - test.at(t, d);
      sq += diff * diff;
    }
    total += k * std::sqrt(2.0 * sq);
  }
  return total / static_cast<double>(reference.frames());
}

FeatureMatrix convert_features(const Generator<float>& generator, const FeatureMatrix& features,
                               const NormalizationStats& stats) {
  const FeatureMatrix normalized = apply_normalization(features, stats);
  const Tensor<float> out = generator_apply(generator, to_channels_major(normalized));
  return invert_normalization(from_channels_major(out, features), stats);
}

std::vector<FeatureMatrix> convert_corpus(const Generator<float>& generator,
                                          const std::vector<FeatureMatrix>& corpus,
                                          const NormalizationStats& stats) {
  std::vector<FeatureMatrix> out;
  out.reserve(corpus.size());
  for (const auto& f : corpus) out.push_back(convert_features(generator, f, stats));
  return out;
}

double speaker_accuracy(const Classifier<float>& classifier,
                        const std::vector<FeatureMatrix>& corpus, const NormalizationStats& stats) {
  if (corpus.empty()) throw ContractError("speaker_accuracy of an empty corpus");
  std::size_t correct = 0;
  for (const auto& f : corpus) {
    const FeatureMatrix crop = center_crop(f);
    const Tensor<float> image = to_channels_major(apply_normalization(crop, stats))
                                    .reshaped(Shape{1, kMcepDims, crop.frames()});
    const Tensor<float> out = classifier_apply(classifier, image).probs;
    const auto probs = out.data();
    const auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
    if (best == f.speaker_id) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(corpus.size());
}

}  // namespace emotrans
