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

#include "dcl/evaluation.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

namespace dcl {
namespace {

using oracle::count_at;
using oracle::Counts;
using oracle::f_beta;

auto random_pairs(int n, std::uint64_t seed) { return oracle::random_map_pairs(n, seed); }

TEST(Evaluation, SingleCurveMatchesConfusionCounts) {
  for (const auto& [pred, gt] : random_pairs(50, 1)) {
    const PRCurve c = pr_curve(pred, gt);
    for (int t = 0; t < 256; ++t) {
      const Counts k = count_at(pred, gt, t);
      EXPECT_EQ(c[size_t(t)].threshold, t);
      EXPECT_EQ(c[size_t(t)].precision, k.precision());
      EXPECT_EQ(c[size_t(t)].recall, k.recall());
    }
  }
}

TEST(Evaluation, DatasetMetricsMatchOracles) {
  const auto pairs = random_pairs(50, 2);
  std::vector<Tensor> preds, gts;
  for (const auto& p : pairs) preds.push_back(p.pred), gts.push_back(p.gt);
  const MetricSet m = evaluate_maps(preds, gts);

  double best = 0.0;
  for (int t = 0; t < 256; ++t) {
    double ps = 0, rs = 0;
    for (const auto& [pred, gt] : pairs) {
      const Counts k = count_at(pred, gt, t);
      ps += k.precision();
      rs += k.recall();
    }
    const double p = ps / double(pairs.size()), r = rs / double(pairs.size());
    EXPECT_EQ(m.curve[size_t(t)].precision, p);
    EXPECT_EQ(m.curve[size_t(t)].recall, r);
    best = std::max(best, f_beta(p, r));
  }
  EXPECT_EQ(m.max_f, best);

  double ap = 0, ar = 0, af = 0, err = 0;
  for (const auto& [pred, gt] : pairs) {
    const Counts k = oracle::counts_at_value(pred, gt, -1.0);
    ap += k.precision(), ar += k.recall(), af += f_beta(k.precision(), k.recall());
    err += oracle::mean_abs_error(pred, gt);
  }
  const double n = double(pairs.size());
  EXPECT_EQ(m.adaptive.precision, ap / n);
  EXPECT_EQ(m.adaptive.recall, ar / n);
  EXPECT_EQ(m.adaptive.f, af / n);
  EXPECT_EQ(m.mae, err / n);
}

TEST(Evaluation, FMeasureValues) {
  EXPECT_NEAR(f_measure(0.8, 0.4), 0.65, 1e-12);
  EXPECT_DOUBLE_EQ(f_measure(1.0, 1.0), 1.0);
  for (double x : {0.1, 0.37, 0.9}) EXPECT_NEAR(f_measure(x, x), x, 1e-15);
  EXPECT_EQ(f_measure(0.0, 0.0), 0.0);
}

TEST(Evaluation, CurveExamples) {
  // Perfect binary prediction.
  Tensor gt({1, 1, 2, 4}, {1, 1, 0, 0, 1, 0, 0, 0});
  PRCurve c = pr_curve(gt, gt);
  for (int t = 1; t < 256; ++t) {
    EXPECT_EQ(c[size_t(t)].precision, 1.0);
    EXPECT_EQ(c[size_t(t)].recall, 1.0);
  }
  // Everything at 255 against a half-salient mask.
  Tensor full({1, 1, 2, 2}, {1, 1, 1, 1});
  Tensor half({1, 1, 2, 2}, {1, 0, 1, 0});
  c = pr_curve(full, half);
  for (const auto& p : c) {
    EXPECT_EQ(p.precision, 0.5);
    EXPECT_EQ(p.recall, 1.0);
  }
  // Nothing predicted: precision 1 by definition.
  Tensor zero({1, 1, 2, 2});
  EXPECT_EQ(pr_curve(zero, half)[200].precision, 1.0);
  EXPECT_EQ(pr_curve(zero, half)[200].recall, 0.0);
}

TEST(Evaluation, RecallNonIncreasingAndMaxFDominates) {
  const auto pairs = random_pairs(20, 3);
  std::vector<Tensor> preds, gts;
  for (const auto& p : pairs) preds.push_back(p.pred), gts.push_back(p.gt);
  const MetricSet m = evaluate_maps(preds, gts);
  for (int t = 1; t < 256; ++t) EXPECT_LE(m.curve[size_t(t)].recall, m.curve[size_t(t - 1)].recall);
  for (const auto& p : m.curve) EXPECT_GE(m.max_f, f_measure(p.precision, p.recall));
  for (double v : {m.max_f, m.adaptive.precision, m.adaptive.recall, m.adaptive.f, m.mae}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Evaluation, AdaptiveThreshold) {
  Tensor m({1, 1, 1, 5}, {0.1, 0.1, 0.1, 0.2, 0.5});
  EXPECT_NEAR(adaptive_threshold(m), 0.4, 1e-15);
  Tensor constant({1, 1, 2, 2}, {0.3, 0.3, 0.3, 0.3});
  EXPECT_EQ(adaptive_threshold(constant), 0.3);
  Tensor gt({1, 1, 2, 2}, {1, 0, 0, 0});
  const PRF r = adaptive_threshold_prf(constant, gt);
  EXPECT_EQ(r.precision, 0.25);
  EXPECT_EQ(r.recall, 1.0);
}

TEST(Evaluation, MaeExamplesAndProperties) {
  Tensor a({1, 1, 2, 2}, {0.5, 0.5, 0.5, 0.5});
  EXPECT_EQ(mae(a, Tensor({1, 1, 2, 2})), 0.5);
  EXPECT_EQ(mae(a, a), 0.0);
  Tensor p({1, 1, 2, 2}, {0.25, 1.0, 0.0, 0.5});
  Tensor g({1, 1, 2, 2}, {0.0, 1.0, 1.0, 0.0});
  EXPECT_EQ(mae(p, g), (0.25 + 0.0 + 1.0 + 0.5) / 4.0);

  const auto pairs = random_pairs(10, 4);
  for (size_t i = 0; i + 1 < pairs.size(); ++i) {
    const Tensor& x = pairs[i].pred;
    Tensor y = x, z = x;
    std::mt19937_64 rng(i);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Index k = 0; k < x.size(); ++k) y[k] = u(rng), z[k] = u(rng);
    EXPECT_DOUBLE_EQ(mae(x, y), mae(y, x));
    EXPECT_LE(mae(x, z), mae(x, y) + mae(y, z) + 1e-15);
  }
}

TEST(Evaluation, DimensionMismatchNamesImage) {
  std::vector<Tensor> preds{Tensor({1, 1, 2, 2}), Tensor({1, 1, 2, 3})};
  std::vector<Tensor> gts{Tensor({1, 1, 2, 2}), Tensor({1, 1, 2, 2})};
  try {
    pr_curve(preds, gts, {"a.ppm", "b.ppm"});
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("b.ppm"), std::string::npos);
  }
}

TEST(Evaluation, MetricsCsvRoundTrip) {
  const auto pairs = random_pairs(5, 5);
  std::vector<Tensor> preds, gts;
  for (const auto& p : pairs) preds.push_back(p.pred), gts.push_back(p.gt);
  const MetricSet m = evaluate_maps(preds, gts);
  auto rows = metric_rows("toy", "fused", m);
  const auto more = metric_rows("toy", "s1", m);
  rows.insert(rows.end(), more.begin(), more.end());
  ASSERT_EQ(rows.size(), 10u);
  const auto path = std::filesystem::temp_directory_path() / "dcl_metrics_roundtrip.csv";
  write_metrics_csv(path.string(), rows);
  EXPECT_EQ(read_metrics_csv(path.string()), rows);

  const auto pr_path = std::filesystem::temp_directory_path() / "dcl_pr.csv";
  write_pr_csv(pr_path.string(), m.curve);
  std::ifstream in(pr_path);
  std::string line;
  int lines = 0;
  std::getline(in, line);
  EXPECT_EQ(line, "threshold,precision,recall");
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 256);
  std::filesystem::remove(path);
  std::filesystem::remove(pr_path);
}

}  // namespace
}  // namespace dcl
