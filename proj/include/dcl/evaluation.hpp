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


#pragma once

#include "dcl/tensor.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace dcl {

// Saliency maps are [1,1,H,W] in [0,1]; ground-truth masks are binary
// (a pixel is salient iff its value is > 0.5). Curves threshold the map
// quantised to round(255 s): a pixel is predicted salient at threshold t
// iff its quantised value is >= t.

inline constexpr double kBetaSquared = 0.3;

struct PRPoint {
  int threshold = 0;
  double precision = 1.0;
  double recall = 0.0;
};
using PRCurve = std::array<PRPoint, 256>;

std::vector<std::uint8_t> quantize_map(const Tensor& saliency);

/// Curve of a single map; precision is 1 when nothing is predicted and
/// recall is 1 when the mask has no salient pixel.
PRCurve pr_curve(const Tensor& pred, const Tensor& gt);
/// Per-threshold precision and recall averaged over the dataset. `names`
/// (optional) identify images in dimension errors.
PRCurve pr_curve(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts,
                 const std::vector<std::string>& names = {});

/// (1 + b2) P R / (b2 P + R); 0 when P = R = 0.
double f_measure(double precision, double recall, double beta2 = kBetaSquared);
double max_f(const PRCurve& curve, double beta2 = kBetaSquared);

struct PRF {
  double precision = 0.0, recall = 0.0, f = 0.0;
};

/// Binarises at min(2 mean, max) (pixels >= threshold are salient).
double adaptive_threshold(const Tensor& pred);
PRF adaptive_threshold_prf(const Tensor& pred, const Tensor& gt);
/// Per-image P, R and F averaged over the dataset.
PRF adaptive_threshold_prf(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts,
                           const std::vector<std::string>& names = {});

double mae(const Tensor& pred, const Tensor& gt);
double mae(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts,
           const std::vector<std::string>& names = {});

struct MetricSet {
  double max_f = 0.0;
  PRF adaptive;
  double mae = 0.0;
  PRCurve curve;
};

MetricSet evaluate_maps(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts,
                        const std::vector<std::string>& names = {});

struct MetricRow {
  std::string dataset, variant, metric;
  double value = 0.0;
  bool operator==(const MetricRow&) const = default;
};

/// Rows maxF, adaptiveP, adaptiveR, adaptiveF, MAE for one (dataset, variant).
std::vector<MetricRow> metric_rows(const std::string& dataset, const std::string& variant, const MetricSet& m);

/// "dataset,variant,metric,value" with a header line; values printed with
/// round-trip precision.
void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(const std::string& path);

/// "threshold,precision,recall" header plus 256 rows.
void write_pr_csv(const std::string& path, const PRCurve& curve);

}  // namespace dcl
