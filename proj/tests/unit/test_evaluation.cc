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

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "emotrans/evaluation.h"
#include "test_util.h"

namespace emotrans {
namespace {

using testing::uniform_tensor;

EmbeddingStats stats(std::vector<double> mean, std::vector<double> cov) {
  EmbeddingStats s;
  s.mean = std::move(mean);
  s.cov = std::move(cov);
  s.count = 100;
  return s;
}

std::vector<double> diag(std::initializer_list<double> d) {
  const std::size_t n = d.size();
  std::vector<double> m(n * n, 0.0);
  std::size_t i = 0;
  for (double v : d) m[i * n + i] = v, ++i;
  return m;
}

TEST(FitGaussian, HandEvaluated) {
  const auto s = fit_gaussian({{0, 0}, {2, 0}});
  EXPECT_EQ(s.mean, (std::vector<double>{1, 0}));
  EXPECT_EQ(s.cov, (std::vector<double>{2, 0, 0, 0}));
  EXPECT_EQ(s.count, 2u);
}

TEST(FitGaussian, IdenticalRowsGiveZeroCovariance) {
  const auto s = fit_gaussian({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
  for (double v : s.cov) EXPECT_EQ(v, 0.0);
}

TEST(FitGaussian, RowOrderDoesNotMatter) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  std::vector<std::vector<double>> rows(30, std::vector<double>(4));
  for (auto& r : rows) for (auto& v : r) v = n(rng);
  const auto a = fit_gaussian(rows);
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto b = fit_gaussian(rows);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a.mean[i], b.mean[i], 1e-14);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_NEAR(a.cov[i], b.cov[i], 1e-13);
    EXPECT_EQ(a.cov[i], a.cov[(i % 4) * 4 + i / 4]);
  }
}

TEST(FitGaussian, NeedsTwoRows) {
  EXPECT_THROW(fit_gaussian({{1, 2}}), ContractError);
  EXPECT_THROW(fit_gaussian({{1, 2}, {1}}), ContractError);
}

TEST(Frechet, IdenticalStatsAreZero) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  std::vector<std::vector<double>> rows(50, std::vector<double>(6));
  for (auto& r : rows) for (auto& v : r) v = n(rng);
  const auto s = fit_gaussian(rows);
  EXPECT_NEAR(frechet_distance(s, s), 0.0, 1e-8);
}

TEST(Frechet, OneDimensionalShift) {
  EXPECT_NEAR(frechet_distance(stats({0}, {1}), stats({1}, {1})), 1.0, 1e-6);
}

TEST(Frechet, DiagonalClosedForm) {
  EXPECT_NEAR(frechet_distance(stats({0, 0}, diag({1, 4})), stats({0, 0}, diag({9, 16}))), 8.0,
              1e-6);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> ma(5), mb(5), va(5), vb(5);
    double expected = 0;
    for (int i = 0; i < 5; ++i) {
      ma[i] = u(rng), mb[i] = u(rng), va[i] = u(rng), vb[i] = u(rng);
      expected += (ma[i] - mb[i]) * (ma[i] - mb[i]) +
                  (std::sqrt(va[i]) - std::sqrt(vb[i])) * (std::sqrt(va[i]) - std::sqrt(vb[i]));
    }
    std::vector<double> ca(25, 0), cb(25, 0);
    for (int i = 0; i < 5; ++i) ca[i * 6] = va[i], cb[i * 6] = vb[i];
    EXPECT_NEAR(frechet_distance(stats(ma, ca), stats(mb, cb)), expected, 1e-6);
  }
}

TEST(Frechet, SymmetricAndNonNegative) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> ra(20, std::vector<double>(5)), rb(25, std::vector<double>(5));
    for (auto& r : ra) for (auto& v : r) v = n(rng);
    for (auto& r : rb) for (auto& v : r) v = 2 * n(rng) + 0.3;
    const auto a = fit_gaussian(ra), b = fit_gaussian(rb);
    const double ab = frechet_distance(a, b), ba = frechet_distance(b, a);
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(ab, ba, 1e-8);
  }
}

TEST(Frechet, RankDeficientCovarianceIsFine) {
  const auto a = fit_gaussian({{0, 0, 0}, {1, 1, 1}});
  const auto b = fit_gaussian({{0, 1, 0}, {1, 0, 2}});
  const double d = frechet_distance(a, b);
  EXPECT_TRUE(std::isfinite(d));
  EXPECT_GE(d, 0.0);
}

TEST(Frechet, DimensionMismatchIsContractError) {
  EXPECT_THROW(frechet_distance(stats({0}, {1}), stats({0, 0}, diag({1, 1}))), ContractError);
}

TEST(Frechet, MonteCarloMatchesAnalytic) {
  constexpr int d = 4, n = 5000;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0, 1);
  auto random_spd = [&] {
    Eigen::Matrix4d a;
    for (int i = 0; i < d; ++i) for (int j = 0; j < d; ++j) a(i, j) = z(rng) * 0.7;
    return Eigen::Matrix4d(a * a.transpose() + 0.5 * Eigen::Matrix4d::Identity());
  };
  const Eigen::Matrix4d s1 = random_spd(), s2 = random_spd();
  Eigen::Vector4d m1, m2;
  for (int i = 0; i < d; ++i) m1(i) = z(rng), m2(i) = z(rng);

  auto draw = [&](const Eigen::Vector4d& m, const Eigen::Matrix4d& s) {
    const Eigen::Matrix4d l = s.llt().matrixL();
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    for (auto& r : rows) {
      Eigen::Vector4d e;
      for (int i = 0; i < d; ++i) e(i) = z(rng);
      const Eigen::Vector4d x = m + l * e;
      for (int i = 0; i < d; ++i) r[i] = x(i);
    }
    return fit_gaussian(rows);
  };
  const double measured = frechet_distance(draw(m1, s1), draw(m2, s2));

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> e1(s1);
  const Eigen::Matrix4d r1 = e1.operatorSqrt();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> cross(r1 * s2 * r1);
  const double analytic = (m1 - m2).squaredNorm() + s1.trace() + s2.trace() -
                          2 * cross.eigenvalues().cwiseMax(0).cwiseSqrt().sum();
  EXPECT_NEAR(measured, analytic, 0.05 * analytic) << "analytic " << analytic;
}

TEST(SqrtmPsd, SquaresBack) {
  const std::vector<double> m{4, 2, 0, 2, 3, 1, 0, 1, 2};
  const auto r = sqrtm_psd(m, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double v = 0;
      for (int k = 0; k < 3; ++k) v += r[i * 3 + k] * r[k * 3 + j];
      EXPECT_NEAR(v, m[i * 3 + j], 1e-10);
    }
  }
}

FeatureMatrix features(std::size_t frames, std::mt19937_64& rng, double offset = 0) {
  auto t = uniform_tensor<float>({frames, kMcepDims}, rng);
  for (auto& v : t.data()) v += static_cast<float>(offset);
  return make_feature_matrix(std::move(t));
}

TEST(Mcd, Examples) {
  std::mt19937_64 rng(6);
  const FeatureMatrix a = features(50, rng);
  EXPECT_EQ(mcd(a, a), 0.0);
  FeatureMatrix b = a;
  for (std::size_t t = 0; t < 50; ++t) b.mcep[t * kMcepDims + 3] += 1.0f;
  EXPECT_NEAR(mcd(a, b), 10 / std::numbers::ln10 * std::sqrt(2.0), 1e-4);
  EXPECT_NEAR(mcd(a, b), 6.1418, 1e-4);
  const FeatureMatrix c = features(50, rng);
  EXPECT_EQ(mcd(a, c), mcd(c, a));
  EXPECT_THROW(mcd(a, features(51, rng)), ContractError);
}

TEST(Mcd, TriangleInequality) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMatrix a = features(1, rng), b = features(1, rng), c = features(1, rng);
    EXPECT_LE(mcd(a, c), mcd(a, b) + mcd(b, c) + 1e-9);
  }
}

TEST(Embedder, IdentityIsCenteredCropMean) {
  std::mt19937_64 rng(8);
  const FeatureMatrix f = features(200, rng);
  const auto e = Embedder::identity().embed(f);
  ASSERT_EQ(e.size(), kMcepDims);
  double m = 0;
  for (std::size_t t = 36; t < 164; ++t) m += f.at(t, 2);
  EXPECT_NEAR(e[2], m / 128, 1e-9);
}

TEST(Fad, SameSetIsZeroAndArgumentsCommute) {
  std::mt19937_64 rng(9);
  std::vector<FeatureMatrix> a, b;
  for (int i = 0; i < 30; ++i) a.push_back(features(130, rng));
  for (int i = 0; i < 30; ++i) b.push_back(features(140, rng, 0.2));
  const Embedder id = Embedder::identity();
  EXPECT_NEAR(fad(a, a, id), 0.0, 1e-6);
  EXPECT_NEAR(fad(a, b, id), fad(b, a, id), 1e-8);
  EXPECT_GT(fad(a, b, id), 0.5);
}

TEST(Fad, ClassifierEmbedderRuns) {
  std::mt19937_64 rng(10);
  const auto cls = build_classifier<float>(ClassifierConfig::desk(), rng);
  NormalizationStats s;
  s.mean.assign(kMcepDims, 0.0);
  s.std.assign(kMcepDims, 1.0);
  const Embedder e = Embedder::classifier(cls, s);
  EXPECT_EQ(e.dim(), 64u);
  std::vector<FeatureMatrix> a;
  for (int i = 0; i < 4; ++i) a.push_back(features(128, rng));
  EXPECT_NEAR(fad(a, a, e), 0.0, 1e-6);
}

TEST(Conversion, PreservesFrameCountAndTags) {
  std::mt19937_64 rng(11);
  GeneratorConfig c;
  c.base_channels = 4;
  c.n_residual = 1;
  const auto g = build_generator<float>(c, rng);
  NormalizationStats s;
  s.mean.assign(kMcepDims, 0.5);
  s.std.assign(kMcepDims, 2.0);
  for (std::size_t frames : {1u, 128u, 130u}) {
    FeatureMatrix f = features(frames, rng);
    f.speaker_id = 3;
    const FeatureMatrix out = convert_features(g, f, s);
    EXPECT_EQ(out.frames(), frames);
    EXPECT_EQ(out.speaker_id, 3);
  }
}

}  // namespace
}  // namespace emotrans
