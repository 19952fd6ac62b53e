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


#include "dcl/pipeline.hpp"

#include "dcl/image_io.hpp"
#include "dcl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>
#include <stdexcept>

namespace dcl {

namespace fs = std::filesystem;

namespace {

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

Tensor rows_to_tensor(const RowMatrixXd& m) {
  Tensor t({m.rows(), m.cols()});
  std::memcpy(t.ptr(), m.data(), sizeof(double) * size_t(m.size()));
  return t;
}

Index stride_of(const PipelineConfig& c) { return c.net.total_stride(); }

}  // namespace

Model build_model(const PipelineConfig& config) {
  config.validate();
  Model m;
  m.weights = build_msfcn(config.net, config.seed, "msfcn.");
  m.weights.merge(build_attention(config.net.feature_channels(), config.attn_hidden, config.seed + 1));
  const Index dim = 3 * DescriptorOptions{}.grid_h * DescriptorOptions{}.grid_w * config.net.feature_channels();
  m.weights.merge(build_segment_mlp(dim, config.mlp_hidden, config.seed + 2));
  m.weights.merge(identity_descriptor_norm(dim));
  m.weights.merge(build_conv_fusion());
  return m;
}

WeightStore build_contour_model(const PipelineConfig& config) {
  return build_msfcn(config.net, config.seed + 4, "contour.");
}

Tensor image_to_input(const Tensor& image) {
  Tensor x = image;
  x.data() -= 0.5;
  return x;
}

std::vector<SegmentationLevel> segment_levels(const PipelineConfig& config, const Tensor& image) {
  Tensor scaled = image;
  scaled.data() *= 255.0;
  return multi_level_segment(scaled, config.seg);
}

SegmentPrediction predict_segments(const Model& model, const Tensor& features,
                                   const std::vector<SegmentationLevel>& levels, const RFProjection& rf) {
  NoGradGuard no_grad;
  SegmentPrediction p;
  const Tensor scaled = normalize_features(features);
  for (size_t l = 0; l < levels.size(); ++l) {
    const RowMatrixXd d = apply_descriptor_norm(build_level_descriptors(levels[l], Index(l), scaled, rf), model.weights);
    const Tensor s = score_segments(Var::constant(rows_to_tensor(d)), model.weights).value();
    p.scores.emplace_back(Eigen::Map<const Eigen::VectorXd>(s.ptr(), levels[l].count()));
  }
  p.s2 = render_s2(levels, p.scores);
  return p;
}

// ---------------------------------------------------------------- training

namespace {

std::vector<ParamRef> stream_one_params(const WeightStore& w, const std::string& prefix, double lr_new,
                                        double lr_backbone) {
  std::vector<ParamRef> out;
  for (auto p : w.params(prefix)) {
    p.lr_mult = starts_with(p.name, prefix + "stage") ? lr_backbone / lr_new : 1.0;
    out.push_back(std::move(p));
  }
  return out;
}

double per_pixel(const Tensor& mask) { return 1.0 / double(mask.size()); }

void require_finite(double loss, const std::string& phase) {
  if (!std::isfinite(loss)) throw NonFiniteError("non-finite loss during " + phase);
}

OptimizerState make_opt(double lr, const TrainConfig& t, long max_iter) {
  OptimizerState s;
  s.base_lr = lr;
  s.momentum = t.momentum;
  s.weight_decay = t.weight_decay;
  s.power = t.power;
  s.max_iter = std::max(1L, max_iter);
  return s;
}

}  // namespace

AlternateTrainer::AlternateTrainer(PipelineConfig config, std::vector<Sample> samples, Model init)
    : config_(std::move(config)), samples_(std::move(samples)), model_{init.weights.clone()}, rng_(config_.seed + 3) {
  config_.validate();
  if (samples_.empty()) throw std::invalid_argument("alternate_train: no training samples");
  const Index h = samples_.front().image.dim(2), w = samples_.front().image.dim(3);
  const Index stride = stride_of(config_);
  for (const Sample& s : samples_) {
    if (s.image.dim(2) != h || s.image.dim(3) != w) {
      throw std::invalid_argument("alternate_train: " + s.name + " differs in size; resize the corpus first");
    }
  }
  if (h % stride != 0 || w % stride != 0) {
    throw std::invalid_argument("alternate_train: image size must be a multiple of " + std::to_string(stride));
  }
  rf_ = project_rf_centers(config_.net, h, w);
  for (const Sample& s : samples_) {
    Item it{&s, false, s.image, s.mask, image_to_input(s.image), segment_levels(config_, s.image)};
    if (config_.train.flip) {
      Item f{&s, true, flip_horizontal(s.image), flip_horizontal(s.mask), {}, {}};
      f.input = image_to_input(f.image);
      for (const auto& l : it.levels) f.levels.push_back(flip_level(l));
      items_.push_back(std::move(it));
      items_.push_back(std::move(f));
    } else {
      items_.push_back(std::move(it));
    }
  }
  const TrainConfig& t = config_.train;
  const long n = long(items_.size());
  const long batches = (long(samples_.size()) + t.batch_images - 1) / t.batch_images;
  warmup_opt_ = make_opt(t.lr_new, t, long(t.warmup_epochs) * n);
  fcn_opt_ = make_opt(t.lr_new, t, long(t.alternations) * t.fcn_epochs * n);
  mlp_init_opt_ = make_opt(t.lr_mlp, t, long(t.mlp_init_epochs) * batches);
  mlp_opt_ = make_opt(t.lr_mlp, t, long(t.alternations) * t.mlp_epochs * batches);
}

std::vector<size_t> AlternateTrainer::epoch_order() {
  std::vector<size_t> order(items_.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Fisher-Yates with an explicit draw so the order is library-independent.
  for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[size_t(rng_() % i)]);
  return order;
}

void AlternateTrainer::log(const std::string& phase, int epoch, double loss) {
  history_.push_back({phase, round_, epoch, loss});
  if (logger_) logger_(history_.back());
}

double AlternateTrainer::warmup_epoch() {
  auto params = stream_one_params(model_.weights, "msfcn.", config_.train.lr_new,
                                  config_.train.lr_backbone);
  double total = 0.0;
  for (size_t idx : epoch_order()) {
    const Item& it = items_[idx];
    const MsfcnOutput out = forward_msfcn(model_.weights, config_.net, Var::constant(it.input));
    const Var loss = scale(balanced_bce_loss(out.saliency, it.mask), per_pixel(it.mask));
    require_finite(loss.value()[0], "warmup");
    loss.backward();
    sgd_step(params, warmup_opt_);
    total += loss.value()[0];
  }
  const double mean = total / double(items_.size());
  log("warmup", int(warmup_opt_.iter / long(items_.size())), mean);
  return mean;
}

double AlternateTrainer::train_fused_epoch() {
  const TrainConfig& t = config_.train;
  auto params = stream_one_params(model_.weights, "msfcn.", t.lr_new, t.lr_backbone);
  for (auto& p : model_.weights.params("attn.")) params.push_back(p);
  for (auto& p : model_.weights.params("fuse1x1.")) params.push_back(p);
  const Index stride = stride_of(config_);
  // Stream 2 is fixed for the whole phase, output included: the MLP and the
  // descriptor statistics were fitted on the features of this backbone, not
  // on the ones it drifts to during the epoch.
  std::vector<Tensor> s2_fixed(items_.size());
  {
    NoGradGuard no_grad;
    for (size_t i = 0; i < items_.size(); ++i) {
      const Tensor features = forward_msfcn(model_.weights, config_.net, Var::constant(items_[i].input)).features.value();
      s2_fixed[i] = predict_segments(model_, features, items_[i].levels, rf_).s2;
    }
  }
  double total = 0.0;
  for (size_t idx : epoch_order()) {
    const Item& it = items_[idx];
    const MsfcnOutput out = forward_msfcn(model_.weights, config_.net, Var::constant(it.input));
    const Tensor& s2 = s2_fixed[idx];
    const Var fused = fuse_streams(FusionMode::kAttention, config_.fusion_resolution, out.saliency_low, s2,
                                   out.features, model_.weights, stride);
    const Var loss = scale(balanced_bce_loss(fused, it.mask), per_pixel(it.mask));
    // The 1x1 fusion baseline learns from the same maps without touching stream 1.
    const Var conv = fuse_streams(FusionMode::kConv1x1, config_.fusion_resolution, out.saliency_low.detach(), s2,
                                  out.features, model_.weights, stride);
    const Var loss_conv = scale(balanced_bce_loss(conv, it.mask), per_pixel(it.mask));
    require_finite(loss.value()[0], "stream-1 training");
    require_finite(loss_conv.value()[0], "stream-1 training");
    loss.backward();
    loss_conv.backward();
    sgd_step(params, fcn_opt_);
    total += loss.value()[0];
  }
  const double mean = total / double(items_.size());
  int epoch = 1;
  for (const TrainLogEntry& e : history_) epoch += e.phase == "fcn" && e.round == round_;
  log("fcn", epoch, mean);
  return mean;
}

double AlternateTrainer::train_segment_stream(int epochs, bool initial) {
  OptimizerState& opt = initial ? mlp_init_opt_ : mlp_opt_;
  // Descriptors and labels per training item, from the current (fixed) backbone.
  std::vector<RowMatrixXd> desc(items_.size());
  std::vector<Eigen::VectorXd> labels(items_.size());
  {
    NoGradGuard no_grad;
    for (size_t i = 0; i < items_.size(); ++i) {
      const Item& it = items_[i];
      const Tensor features =
          normalize_features(forward_msfcn(model_.weights, config_.net, Var::constant(it.input)).features.value());
      Index rows = 0;
      for (const auto& l : it.levels) rows += l.count();
      const Index dim = 3 * 4 * features.dim(1);
      desc[i].resize(rows, dim);
      labels[i].resize(rows);
      Index at = 0;
      for (size_t l = 0; l < it.levels.size(); ++l) {
        desc[i].middleRows(at, it.levels[l].count()) = build_level_descriptors(it.levels[l], Index(l), features, rf_);
        const Tensor y = segment_labels(it.levels[l], it.mask);
        labels[i].segment(at, it.levels[l].count()) = Eigen::Map<const Eigen::VectorXd>(y.ptr(), y.size());
        at += it.levels[l].count();
      }
    }
  }
  {
    Index rows = 0;
    for (const auto& d : desc) rows += d.rows();
    RowMatrixXd all(rows, desc.front().cols());
    Index at = 0;
    for (const auto& d : desc) all.middleRows(at, d.rows()) = d, at += d.rows();
    const WeightStore norm = fit_descriptor_norm(all);
    for (const auto& [name, v] : norm.entries()) model_.weights.at(name).mutable_value() = v.value();
    for (auto& d : desc) d = apply_descriptor_norm(d, model_.weights);
  }
  // Batches are groups of `batch_images` images; a flipped copy counts as an image.
  auto params = model_.weights.params("mlp.");
  const size_t batch = size_t(config_.train.batch_images);
  double last = 0.0;
  for (int e = 0; e < epochs; ++e) {
    const auto order = epoch_order();
    double total = 0.0;
    int steps = 0;
    for (size_t b = 0; b < order.size(); b += batch) {
      const size_t end = std::min(order.size(), b + batch);
      Index rows = 0;
      for (size_t k = b; k < end; ++k) rows += desc[order[k]].rows();
      RowMatrixXd x(rows, desc[order[b]].cols());
      Tensor y({rows, 1});
      Index at = 0;
      for (size_t k = b; k < end; ++k) {
        const auto& d = desc[order[k]];
        x.middleRows(at, d.rows()) = d;
        for (Index r = 0; r < d.rows(); ++r) y[at + r] = labels[order[k]][r];
        at += d.rows();
      }
      const Var pred = score_segments(Var::constant(rows_to_tensor(x)), model_.weights);
      const Var loss = scale(squared_error_loss(pred, y), 1.0 / double(rows));
      require_finite(loss.value()[0], "segment-stream training");
      loss.backward();
      sgd_step(params, opt);
      total += loss.value()[0];
      ++steps;
    }
    last = total / double(std::max(steps, 1));
    log(initial ? "mlp_init" : "mlp", e + 1, last);
  }
  return last;
}

void AlternateTrainer::checkpoint(const std::string& dir, const std::string& name) {
  const int index = phase_count_++;
  if (dir.empty()) return;
  fs::create_directories(dir);
  char file[64];
  std::snprintf(file, sizeof(file), "phase_%02d_%s.dclw", index, name.c_str());
  save_weights(model_.weights, fs::path(dir) / file);
}

Model AlternateTrainer::run(const std::string& checkpoint_dir) {
  const TrainConfig& t = config_.train;
  round_ = 0;
  for (int e = 0; e < t.warmup_epochs; ++e) warmup_epoch();
  checkpoint(checkpoint_dir, "warmup");
  train_segment_stream(t.mlp_init_epochs, true);
  checkpoint(checkpoint_dir, "mlp_init");
  for (int r = 1; r <= t.alternations; ++r) {
    round_ = r;
    for (int e = 0; e < t.fcn_epochs; ++e) train_fused_epoch();
    checkpoint(checkpoint_dir, "fcn_r" + std::to_string(r));
    train_segment_stream(t.mlp_epochs, false);
    checkpoint(checkpoint_dir, "mlp_r" + std::to_string(r));
  }
  return Model{model_.weights.clone()};
}

WeightStore train_contour_model(const PipelineConfig& config, const std::vector<Sample>& samples,
                                const std::function<void(const TrainLogEntry&)>& logger) {
  config.validate();
  WeightStore w = build_contour_model(config);
  struct Item {
    Tensor input, target;
  };
  std::vector<Item> items;
  for (const Sample& s : samples) {
    items.push_back({image_to_input(s.image), prepare_contour_gt(s.mask)});
    if (config.train.flip) {
      items.push_back({image_to_input(flip_horizontal(s.image)), prepare_contour_gt(flip_horizontal(s.mask))});
    }
  }
  if (items.empty()) throw std::invalid_argument("train_contour_model: no training samples");
  const ContourTrainConfig& c = config.contour;
  OptimizerState opt = make_opt(c.lr_new, config.train, long(c.epochs) * long(items.size()));
  auto params = stream_one_params(w, "contour.", c.lr_new, c.lr_backbone);
  std::mt19937_64 rng(config.seed + 5);
  std::vector<size_t> order(items.size());
  for (int e = 0; e < c.epochs; ++e) {
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[size_t(rng() % i)]);
    double total = 0.0;
    for (size_t idx : order) {
      const Item& it = items[idx];
      const MsfcnOutput out = forward_msfcn(w, config.net, Var::constant(it.input), "contour.");
      const Var loss = scale(balanced_bce_loss(out.saliency, it.target), per_pixel(it.target));
      require_finite(loss.value()[0], "contour training");
      loss.backward();
      sgd_step(params, opt);
      total += loss.value()[0];
    }
    if (logger) logger({"contour", 0, e + 1, total / double(items.size())});
  }
  return w;
}

// ---------------------------------------------------------------- inference

InferResult infer(const PipelineConfig& config, const Model& model, const WeightStore* contour_model,
                  const Tensor& image, const InferOptions& opt) {
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3) {
    throw std::invalid_argument("infer: expected an RGB image [1,3,H,W], got " + shape_str(image.dims()));
  }
  if ((opt.contour || (opt.crf && opt.crf_contour)) && contour_model == nullptr) {
    throw std::invalid_argument("infer: the contour map needs contour weights");
  }
  NoGradGuard no_grad;
  const Index h = image.dim(2), w = image.dim(3), stride = stride_of(config);
  const Tensor padded = reflect_pad_to_multiple(image, stride);
  const Index ph = padded.dim(2), pw = padded.dim(3);
  const Tensor input = image_to_input(padded);
  InferResult r;

  const bool need_fused = opt.fused || opt.crf;
  const bool need_s2 = opt.s2 || need_fused;
  const MsfcnOutput out = forward_msfcn(model.weights, config.net, Var::constant(input));
  Tensor s1_low = out.saliency_low.value();
  Tensor s1 = out.saliency.value();
  if (opt.multiscale) {
    s1 = multiscale_infer(model.weights, config.net, input, config.scales);
    s1_low = area_downsample(s1, stride);
  }
  if (opt.s1) r.s1 = crop(s1, h, w);

  Tensor fused;
  if (need_s2) {
    std::vector<SegmentationLevel> levels = segment_levels(config, padded);
    if (!opt.multilevel) levels = {levels[size_t(config.seg_level)]};
    r.segmentations = int(levels.size());
    const RFProjection rf = project_rf_centers(config.net, ph, pw);
    const Tensor s2 = predict_segments(model, out.features.value(), levels, rf).s2;
    if (opt.s2) r.s2 = crop(s2, h, w);
    if (need_fused) {
      fused = crop(fuse_streams(opt.fusion, config.fusion_resolution, Var::constant(s1_low), s2, out.features,
                                model.weights, stride)
                       .value(),
                   h, w);
      if (opt.fused) r.fused = fused;
    }
  }

  Tensor contour;
  if (opt.contour || (opt.crf && opt.crf_contour)) {
    contour = crop(infer_single_scale(*contour_model, config.net, input, "contour."), h, w);
    if (opt.contour) r.contour = contour;
  }
  if (opt.crf) {
    CrfConfig crf = config.crf;
    if (opt.crf_contour) {
      r.crf = crf_refine(fused, image, contour, crf, &r.warnings);
    } else {
      r.crf = mean_field_infer(fused, image, RowMatrixXd(), crf);
    }
  }
  return r;
}

// ---------------------------------------------------------------- evaluation

std::vector<std::string> all_variants() {
  return {"s1", "s2", "fused_average", "fused_conv1x1", "fused", "fused_single_level", "fused_multiscale",
          "crf_plain", "crf"};
}

InferOptions variant_options(const PipelineConfig& config, const std::string& v) {
  InferOptions o;
  o.fused = false;
  o.multiscale = config.multiscale;
  o.fusion = config.fusion;
  if (v == "s1") {
    o.s1 = true;
  } else if (v == "s2") {
    o.s2 = true;
  } else if (v == "fused") {
    o.fused = true;
  } else if (v == "fused_average") {
    o.fused = true, o.fusion = FusionMode::kAverage;
  } else if (v == "fused_conv1x1") {
    o.fused = true, o.fusion = FusionMode::kConv1x1;
  } else if (v == "fused_single_level") {
    o.fused = true, o.multilevel = false;
  } else if (v == "fused_multiscale") {
    o.fused = true, o.multiscale = true;
  } else if (v == "crf_plain") {
    o.crf = true, o.crf_contour = false;
  } else if (v == "crf") {
    o.crf = true;
  } else {
    std::string known;
    for (const auto& k : all_variants()) known += (known.empty() ? "" : ", ") + k;
    throw std::invalid_argument("unknown variant '" + v + "' (" + known + ")");
  }
  return o;
}

bool variant_needs_contour(const std::string& variant) { return variant == "crf"; }

namespace {

const Tensor& variant_output(const InferResult& r, const InferOptions& o) {
  if (o.crf) return r.crf;
  if (o.fused) return r.fused;
  if (o.s2) return r.s2;
  return r.s1;
}

}  // namespace

EvalReport evaluate(const PipelineConfig& config, const Model& model, const WeightStore* contour_model,
                    const std::vector<Sample>& samples, const std::vector<std::string>& variants,
                    const std::string& dataset, const std::string& out_dir) {
  if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
  std::set<std::string> unique;
  for (const auto& v : variants) {
    variant_options(config, v);
    if (!unique.insert(v).second) throw std::invalid_argument("evaluate: variant '" + v + "' listed twice");
  }
  std::vector<Tensor> gts;
  std::vector<std::string> names;
  for (const Sample& s : samples) gts.push_back(s.mask), names.push_back(s.name);

  EvalReport report;
  for (const auto& v : variants) {
    const InferOptions o = variant_options(config, v);
    std::vector<Tensor> preds;
    preds.reserve(samples.size());
    for (const Sample& s : samples) preds.push_back(variant_output(infer(config, model, contour_model, s.image, o), o));
    const MetricSet m = evaluate_maps(preds, gts, names);
    report.metrics[v] = m;
    const auto rows = metric_rows(dataset, v, m);
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    if (!out_dir.empty()) {
      const fs::path maps = fs::path(out_dir) / "maps" / v;
      fs::create_directories(maps);
      for (size_t i = 0; i < preds.size(); ++i) write_saliency_pgm((maps / (names[i] + ".pgm")).string(), preds[i]);
      write_pr_csv((fs::path(out_dir) / ("pr_" + v + ".csv")).string(), m.curve);
    }
  }
  if (!out_dir.empty()) write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), report.rows);
  return report;
}

}  // namespace dcl
