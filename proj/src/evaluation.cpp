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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace dcl {

namespace {

std::string label(const std::vector<std::string>& names, size_t i) {
  return i < names.size() ? names[i] : "#" + std::to_string(i);
}

void check_pair(const Tensor& pred, const Tensor& gt, const std::string& name) {
  if (pred.dims() != gt.dims()) {
    throw std::invalid_argument("image " + name + ": prediction " + shape_str(pred.dims()) + " vs mask " +
                                shape_str(gt.dims()));
  }
}

void check_sets(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts,
                const std::vector<std::string>& names) {
  if (preds.size() != gts.size()) throw std::invalid_argument("evaluation: prediction and mask counts differ");
  if (preds.empty()) throw std::invalid_argument("evaluation: empty dataset");
  for (size_t i = 0; i < preds.size(); ++i) check_pair(preds[i], gts[i], label(names, i));
}

double ratio_or_one(double num, double den) { return den > 0.0 ? num / den : 1.0; }

// Sequential sums: metric values must not depend on the vectorisation width.
double sequential_mean(const Tensor& t) {
  double total = 0.0;
  for (Index i = 0; i < t.size(); ++i) total += t[i];
  return total / double(t.size());
}

}  // namespace

std::vector<std::uint8_t> quantize_map(const Tensor& saliency) {
  std::vector<std::uint8_t> q(size_t(saliency.size()));
  for (Index i = 0; i < saliency.size(); ++i) {
    q[size_t(i)] = std::uint8_t(std::clamp(std::lround(255.0 * saliency[i]), 0L, 255L));
  }
  return q;
}

PRCurve pr_curve(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt, "#0");
  const auto q = quantize_map(pred);
  std::array<double, 256> pos{}, neg{};
  double positives = 0.0;
  for (Index i = 0; i < gt.size(); ++i) {
    if (gt[i] > 0.5) {
      pos[q[size_t(i)]] += 1.0;
      positives += 1.0;
    } else {
      neg[q[size_t(i)]] += 1.0;
    }
  }
  PRCurve curve;
  double tp = 0.0, fp = 0.0;
  for (int t = 255; t >= 0; --t) {
    tp += pos[size_t(t)];
    fp += neg[size_t(t)];
    curve[size_t(t)] = {t, ratio_or_one(tp, tp + fp), ratio_or_one(tp, positives)};
  }
  return curve;
}

PRCurve pr_curve(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts,
                 const std::vector<std::string>& names) {
  check_sets(preds, gts, names);
  PRCurve avg;
  for (int t = 0; t < 256; ++t) avg[size_t(t)] = {t, 0.0, 0.0};
  for (size_t i = 0; i < preds.size(); ++i) {
    const PRCurve c = pr_curve(preds[i], gts[i]);
    for (size_t t = 0; t < 256; ++t) {
      avg[t].precision += c[t].precision;
      avg[t].recall += c[t].recall;
    }
  }
  for (auto& p : avg) {
    p.precision /= double(preds.size());
    p.recall /= double(preds.size());
  }
  return avg;
}

double f_measure(double precision, double recall, double beta2) {
  const double den = beta2 * precision + recall;
  if (den <= 0.0) return 0.0;
  return (1.0 + beta2) * precision * recall / den;
}

double max_f(const PRCurve& curve, double beta2) {
  double best = 0.0;
  for (const auto& p : curve) best = std::max(best, f_measure(p.precision, p.recall, beta2));
  return best;
}

double adaptive_threshold(const Tensor& pred) { return std::min(2.0 * sequential_mean(pred), pred.data().maxCoeff()); }

PRF adaptive_threshold_prf(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt, "#0");
  const double thr = adaptive_threshold(pred);
  double tp = 0.0, fp = 0.0, positives = 0.0;
  for (Index i = 0; i < pred.size(); ++i) {
    const bool g = gt[i] > 0.5, p = pred[i] >= thr;
    positives += g;
    tp += g && p;
    fp += !g && p;
  }
  PRF r;
  r.precision = ratio_or_one(tp, tp + fp);
  r.recall = ratio_or_one(tp, positives);
  r.f = f_measure(r.precision, r.recall);
  return r;
}

PRF adaptive_threshold_prf(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts,
                           const std::vector<std::string>& names) {
  check_sets(preds, gts, names);
  PRF avg;
  for (size_t i = 0; i < preds.size(); ++i) {
    const PRF r = adaptive_threshold_prf(preds[i], gts[i]);
    avg.precision += r.precision;
    avg.recall += r.recall;
    avg.f += r.f;
  }
  const double n = double(preds.size());
  avg.precision /= n;
  avg.recall /= n;
  avg.f /= n;
  return avg;
}

double mae(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt, "#0");
  double total = 0.0;
  for (Index i = 0; i < pred.size(); ++i) total += std::abs(pred[i] - gt[i]);
  return total / double(pred.size());
}

double mae(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts, const std::vector<std::string>& names) {
  check_sets(preds, gts, names);
  double total = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) total += mae(preds[i], gts[i]);
  return total / double(preds.size());
}

MetricSet evaluate_maps(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts,
                        const std::vector<std::string>& names) {
  MetricSet m;
  m.curve = pr_curve(preds, gts, names);
  m.max_f = max_f(m.curve);
  m.adaptive = adaptive_threshold_prf(preds, gts, names);
  m.mae = mae(preds, gts, names);
  return m;
}

std::vector<MetricRow> metric_rows(const std::string& dataset, const std::string& variant, const MetricSet& m) {
  return {{dataset, variant, "maxF", m.max_f},
          {dataset, variant, "adaptiveP", m.adaptive.precision},
          {dataset, variant, "adaptiveR", m.adaptive.recall},
          {dataset, variant, "adaptiveF", m.adaptive.f},
          {dataset, variant, "MAE", m.mae}};
}

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "dataset,variant,metric,value\n" << std::setprecision(17);
  for (const auto& r : rows) out << r.dataset << ',' << r.variant << ',' << r.metric << ',' << r.value << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  std::getline(in, line);
  if (line != "dataset,variant,metric,value") throw std::runtime_error(path + ": missing metrics header");
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    MetricRow r;
    std::string value;
    if (!std::getline(ss, r.dataset, ',') || !std::getline(ss, r.variant, ',') || !std::getline(ss, r.metric, ',') ||
        !std::getline(ss, value)) {
      throw std::runtime_error(path + ": malformed row '" + line + "'");
    }
    r.value = std::stod(value);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_pr_csv(const std::string& path, const PRCurve& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "threshold,precision,recall\n" << std::setprecision(17);
  for (const auto& p : curve) out << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace dcl
