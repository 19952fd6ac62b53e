/* Copyright 2026 The dcl Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#include "dcl/crf.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

namespace dcl {
namespace {

using testing::random_tensor;

using oracle::exact_marginals;

TEST(Bresenham, EndpointsAndLength) {
  const auto line = bresenham_line(2, 1, 5, 9);
  EXPECT_EQ(line.front(), (std::pair<Index, Index>{2, 1}));
  EXPECT_EQ(line.back(), (std::pair<Index, Index>{5, 9}));
  EXPECT_EQ(line.size(), 9u);
  for (size_t k = 1; k < line.size(); ++k) {
    EXPECT_LE(std::abs(line[k].first - line[k - 1].first), 1);
    EXPECT_LE(std::abs(line[k].second - line[k - 1].second), 1);
  }
  EXPECT_EQ(bresenham_line(3, 3, 3, 3).size(), 1u);
}

TEST(ContourAffinity, ZeroContourConnectsWindow) {
  const auto W = contour_affinity(make_map(12, 12), 11, 0.1);
  const Eigen::MatrixXd d(W);
  for (Index i = 0; i < 144; ++i)
    for (Index j = 0; j < 144; ++j) {
      const bool inside = i != j && std::abs(i / 12 - j / 12) <= 5 && std::abs(i % 12 - j % 12) <= 5;
      EXPECT_EQ(d(i, j), inside ? 1.0 : 0.0);
    }
}

TEST(ContourAffinity, ContourOnLine) {
  Tensor m = make_map(1, 5);
  m[2] = 1.0;
  const Eigen::MatrixXd d(contour_affinity(m, 11, 0.1));
  EXPECT_NEAR(d(0, 4), std::exp(-10.0), 1e-18);
  EXPECT_NEAR(d(0, 4), 4.54e-5, 1e-7);
  EXPECT_EQ(d(0, 1), 1.0);
}

TEST(ContourAffinity, SymmetricAndMonotone) {
  std::mt19937_64 rng(1);
  Tensor m = random_tensor({1, 1, 9, 8}, rng, 0, 1);
  const Eigen::MatrixXd a(contour_affinity(m, 7, 0.1));
  EXPECT_EQ((a - a.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(a.diagonal().cwiseAbs().maxCoeff(), 0.0);
  for (int t = 0; t < 10; ++t) {
    const Index p = Index(rng() % 72);
    m[p] = std::min(1.0, m[p] + 0.3);
    const Eigen::MatrixXd b(contour_affinity(m, 7, 0.1));
    EXPECT_TRUE((b.array() <= a.array()).all());
  }
}

void expect_residuals(const Eigen::SparseMatrix<double>& W, const ContourEmbedding& e, double tol) {
  const Eigen::VectorXd d = e.degree;
  for (Index k = 0; k < e.vectors.cols(); ++k) {
    const Eigen::VectorXd v = e.vectors.col(k);
    const Eigen::VectorXd r = d.asDiagonal() * v - W * v - e.eigenvalues[k] * d.asDiagonal() * v;
    EXPECT_LE(r.norm(), tol * v.norm()) << "pair " << k;
    EXPECT_NEAR(v.dot(d.asDiagonal() * v), 1.0, 1e-9);
    if (k > 0) EXPECT_GE(e.eigenvalues[k], e.eigenvalues[k - 1]);
  }
}

TEST(ContourEmbedding, ZeroContourHasConstantNullVector) {
  const auto W = contour_affinity(make_map(10, 10), 11, 0.1);
  const ContourEmbedding e = contour_embedding(W, 16, 1e-8);
  EXPECT_NEAR(e.eigenvalues[0], 0.0, 1e-10);
  const Eigen::VectorXd v0 = e.vectors.col(0);
  EXPECT_LT((v0.array() - v0.mean()).abs().maxCoeff(), 1e-8);
  EXPECT_GT(v0.mean(), 0.0);
  expect_residuals(W, e, 1e-8);
  EXPECT_LT((e.features().col(0).array() - 1.0).abs().maxCoeff(), 1e-7);
}

TEST(ContourEmbedding, ResidualsOnRandomContoursBothSolvers) {
  std::mt19937_64 rng(2);
  for (Index side : {12, 24}) {  // dense solve, then the iterative one
    const auto W = contour_affinity(random_tensor({1, 1, side, side}, rng, 0, 1), 11, 0.1);
    const ContourEmbedding e = contour_embedding(W, 16, 1e-8);
    ASSERT_EQ(e.vectors.cols(), 16);
    expect_residuals(W, e, 1e-8);
  }
}

TEST(ContourEmbedding, RingSeparatesRegions) {
  const Index n = 20;
  Tensor m = make_map(n, n);
  for (Index k = 5; k <= 14; ++k) {
    m.at(0, 0, 5, k) = m.at(0, 0, 14, k) = m.at(0, 0, k, 5) = m.at(0, 0, k, 14) = 1.0;
  }
  const auto W = contour_affinity(m, 11, 0.1);
  const ContourEmbedding e = contour_embedding(W, 16, 1e-8);
  expect_residuals(W, e, 1e-8);
  EXPECT_LT(e.eigenvalues[1], 1e-3);
  const Eigen::VectorXd v = e.vectors.col(1);
  double inside = 0, outside = 0;
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) {
      if (m.at(0, 0, r, c) == 1.0) continue;
      const bool in = r > 5 && r < 14 && c > 5 && c < 14;
      (in ? inside : outside) = v[r * n + c];
    }
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) {
      if (m.at(0, 0, r, c) == 1.0) continue;
      const bool in = r > 5 && r < 14 && c > 5 && c < 14;
      EXPECT_GT(v[r * n + c] * (in ? inside : outside), 0.0) << r << "," << c;
    }
  EXPECT_LT(inside * outside, 0.0);
}

TEST(ContourEmbedding, EigenvaluesIgnorePixelOrder) {
  std::mt19937_64 rng(3);
  const auto W = contour_affinity(random_tensor({1, 1, 9, 9}, rng, 0, 1), 5, 0.1);
  Eigen::VectorXi perm(81);
  for (int i = 0; i < 81; ++i) perm[i] = i;
  std::shuffle(perm.data(), perm.data() + 81, rng);
  const Eigen::PermutationMatrix<Eigen::Dynamic> P(perm);
  const Eigen::SparseMatrix<double> Wp = P * W * P.transpose();
  const ContourEmbedding a = contour_embedding(W, 8, 1e-10), b = contour_embedding(Wp, 8, 1e-10);
  EXPECT_LT((a.eigenvalues - b.eigenvalues).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ContourEmbedding, IsolatedPixelIsRegularisedWithWarning) {
  Eigen::SparseMatrix<double> W(3, 3);
  W.insert(0, 1) = 1.0;
  W.insert(1, 0) = 1.0;
  const ContourEmbedding e = contour_embedding(W, 2, 1e-8);
  EXPECT_FALSE(e.warnings.empty());
  EXPECT_TRUE(e.eigenvalues.allFinite());
}

TEST(CrfEnergy, UnaryOnlyAndUniformLabels) {
  std::mt19937_64 rng(4);
  const Tensor img = random_tensor({1, 3, 3, 2}, rng, 0, 1), s = random_tensor({1, 1, 3, 2}, rng, 0.05, 0.95);
  const std::vector<int> l = {1, 0, 0, 1, 1, 0};
  CrfConfig off;
  off.w1 = off.w2 = 0.0;
  double nll = 0.0;
  for (Index i = 0; i < 6; ++i) nll -= std::log(l[size_t(i)] ? s[i] : 1 - s[i]);
  EXPECT_NEAR(crf_energy(l, s, img, RowMatrixXd(), off), nll, 1e-12);
  const std::vector<int> ones(6, 1);
  double all = 0.0;
  for (Index i = 0; i < 6; ++i) all -= std::log(s[i]);
  EXPECT_NEAR(crf_energy(ones, s, img, RowMatrixXd(), CrfConfig{}), all, 1e-12);
}

TEST(CrfEnergy, TwoPixelHandComputation) {
  const Tensor img({1, 1, 2, 1}, {0.2, 0.6}), s({1, 1, 2, 1}, {0.7, 0.4});
  RowMatrixXd f(2, 1);
  f << 0.5, -0.5;
  CrfConfig c;
  // |p|^2 = 1, |I|^2 = (0.4 * 255)^2 = 10404, |v|^2 = 1
  const double k1 = std::exp(-1.0 / 18.0 - 10404.0 / 5000.0 - 1.0 / 18.0);
  const double k2 = std::exp(-1.0 / 162.0);
  const double expect = -std::log(0.7) - std::log(0.6) + 3.0 * k1 + 5.0 * k2;
  EXPECT_NEAR(crf_energy({1, 0}, s, img, f, c), expect, 1e-12);
  EXPECT_NEAR(crf_energy({1, 1}, s, img, f, c), -std::log(0.7) - std::log(0.4), 1e-12);
}

TEST(CrfEnergy, MatchesOracleOnRandomLabelings) {
  std::mt19937_64 rng(5);
  const Tensor img = random_tensor({1, 3, 4, 3}, rng, 0, 1), s = random_tensor({1, 1, 4, 3}, rng, 0.05, 0.95);
  const RowMatrixXd f = RowMatrixXd::Random(12, 3);
  for (int t = 0; t < 10; ++t) {
    std::vector<int> l(12);
    for (int& v : l) v = int(rng() & 1);
    EXPECT_NEAR(crf_energy(l, s, img, f, CrfConfig{}), oracle::labeling_energy(l, s, img, f, CrfConfig{}), 1e-10);
  }
}

TEST(MeanField, ZeroWeightsReturnUnary) {
  std::mt19937_64 rng(6);
  const Tensor img = random_tensor({1, 3, 5, 4}, rng, 0, 1), s = random_tensor({1, 1, 5, 4}, rng, 0.01, 0.99);
  CrfConfig off;
  off.w1 = off.w2 = 0.0;
  const Tensor q = mean_field_infer(s, img, RowMatrixXd::Random(20, 2), off);
  EXPECT_LT((q.data() - s.data()).abs().maxCoeff(), 1e-12);
}

TEST(MeanField, SymmetricFixedPoint) {
  const Tensor q = mean_field_infer(make_map(6, 5, 0.5), Tensor({1, 3, 6, 5}, 0.4), RowMatrixXd::Zero(30, 4), CrfConfig{});
  EXPECT_LT((q.data() - 0.5).abs().maxCoeff(), 1e-12);
}

TEST(MeanField, WeakCouplingMatchesEnumeration) {
  std::mt19937_64 rng(7);
  CrfConfig c;
  c.w1 = c.w2 = 0.05;
  for (int t = 0; t < 3; ++t) {
    const Tensor img = random_tensor({1, 3, 4, 3}, rng, 0, 1), s = random_tensor({1, 1, 4, 3}, rng, 0.05, 0.95);
    const RowMatrixXd f = RowMatrixXd::Random(12, 2);
    const Tensor q = mean_field_infer(s, img, f, c);
    const std::vector<double> exact = exact_marginals(s, img, f, c);
    for (Index i = 0; i < 12; ++i) EXPECT_NEAR(q[i], exact[size_t(i)], 0.05);
  }
}

TEST(MeanField, PosteriorStaysInRangeEveryIteration) {
  std::mt19937_64 rng(8);
  const Tensor img = random_tensor({1, 3, 12, 10}, rng, 0, 1), s = random_tensor({1, 1, 12, 10}, rng, 0, 1);
  int calls = 0;
  mean_field_infer(s, img, RowMatrixXd(), CrfConfig{}, [&](int, const Tensor& q) {
    ++calls;
    EXPECT_TRUE((q.data() >= 0.0).all() && (q.data() <= 1.0).all());
  });
  EXPECT_EQ(calls, CrfConfig{}.iterations);
}

TEST(MeanField, KernelPairsMatchDefinition) {
  std::mt19937_64 rng(9);
  const Tensor img = random_tensor({1, 3, 5, 6}, rng, 0, 1);
  const RowMatrixXd f = RowMatrixXd::Random(30, 3);
  CrfConfig c;
  c.sigma_alpha = 1.0;  // radius 3: some pairs fall outside kernel 1
  const DenseCrfKernels k(img, f, c);
  for (Index i = 0; i < 30; ++i)
    for (Index j = 0; j < 30; ++j) {
      if (i == j) continue;
      const bool near1 = std::abs(i / 6 - j / 6) <= 3 && std::abs(i % 6 - j % 6) <= 3;
      CrfConfig only2 = c;
      only2.w1 = 0.0;
      const double expect = near1 ? oracle::theta(img, f, c, i, j) : oracle::theta(img, f, only2, i, j);
      EXPECT_NEAR(k.pair(i, j), expect, 1e-12);
    }
}

TEST(CrfRefine, RunsFromContourMap) {
  std::mt19937_64 rng(10);
  const Tensor img = random_tensor({1, 3, 16, 16}, rng, 0, 1), s = random_tensor({1, 1, 16, 16}, rng, 0, 1);
  const Tensor contour = random_tensor({1, 1, 16, 16}, rng, 0, 1);
  CrfConfig c;
  c.eig_count = 4;
  const Tensor q = crf_refine(s, img, contour, c);
  EXPECT_EQ(q.dims(), s.dims());
  EXPECT_TRUE((q.data() >= 0.0).all() && (q.data() <= 1.0).all());
}

TEST(CrfConfig, RejectsNonPositiveFields) {
  CrfConfig c;
  c.sigma_beta = 0.0;
  c.rho = -1.0;
  try {
    c.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("sigma_beta"), std::string::npos);
    EXPECT_NE(msg.find("rho"), std::string::npos);
  }
}

}  // namespace
}  // namespace dcl
