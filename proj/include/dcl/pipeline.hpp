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

#include "dcl/config.hpp"
#include "dcl/dataset.hpp"
#include "dcl/evaluation.hpp"
#include "dcl/segment_stream.hpp"

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace dcl {

/// Everything the detector learns: "msfcn.", "attn.", "mlp.", "segnorm." and "fuse1x1."
/// parameters in one store.
struct Model {
  WeightStore weights;
};

Model build_model(const PipelineConfig& config);
/// Contour detector: the stream-1 architecture under the "contour." prefix.
WeightStore build_contour_model(const PipelineConfig& config);

/// Network input from an RGB image in [0,1]: values centred on zero.
Tensor image_to_input(const Tensor& image);

/// Segmentation levels of an RGB image in [0,1] (segmented on a 0..255 scale).
std::vector<SegmentationLevel> segment_levels(const PipelineConfig& config, const Tensor& image);

/// Per-level segment scores and the averaged map S2 at image resolution.
struct SegmentPrediction {
  std::vector<Eigen::VectorXd> scores;
  Tensor s2;
};
SegmentPrediction predict_segments(const Model& model, const Tensor& features,
                                   const std::vector<SegmentationLevel>& levels, const RFProjection& rf);

// ---------------------------------------------------------------- training

struct TrainLogEntry {
  std::string phase;  // "warmup", "mlp_init", "fcn", "mlp", "contour"
  int round = 0;      // alternation index (0 for warmup / init)
  int epoch = 0;
  double loss = 0.0;  // mean per-step loss over the epoch
};

/// Alternating optimisation of the two streams. Each phase is a public
/// step so callers (and tests) can drive and inspect it. The trainer works
/// on a private deep copy of `init`; `run` returns another copy.
class AlternateTrainer {
 public:
  AlternateTrainer(PipelineConfig config, std::vector<Sample> samples, Model init);

  /// Stream 1 alone on its own output, before any alternation.
  double warmup_epoch();
  /// Segment stream on descriptors from the current backbone; stream 1 and
  /// the attention module are untouched. `initial` selects the phase-0
  /// optimiser schedule.
  double train_segment_stream(int epochs, bool initial);
  /// Stream 1 + attention (and the 1x1 fusion baseline) for one epoch on the
  /// fused output, with the segment stream fixed.
  double train_fused_epoch();

  /// Full schedule. When `checkpoint_dir` is non-empty the model is saved
  /// after every phase as phase_NN_<name>.dclw.
  Model run(const std::string& checkpoint_dir = {});

  const Model& model() const { return model_; }
  const std::vector<TrainLogEntry>& history() const { return history_; }
  void set_logger(std::function<void(const TrainLogEntry&)> logger) { logger_ = std::move(logger); }

 private:
  struct Item {
    const Sample* sample;
    bool flipped;
    Tensor image;   // possibly flipped
    Tensor mask;
    Tensor input;
    std::vector<SegmentationLevel> levels;
  };

  std::vector<size_t> epoch_order();
  void log(const std::string& phase, int epoch, double loss);
  void checkpoint(const std::string& dir, const std::string& name);

  PipelineConfig config_;
  std::vector<Sample> samples_;
  Model model_;
  std::vector<Item> items_;
  RFProjection rf_;
  std::mt19937_64 rng_;
  OptimizerState warmup_opt_, fcn_opt_, mlp_init_opt_, mlp_opt_;
  int round_ = 0;
  int phase_count_ = 0;
  std::vector<TrainLogEntry> history_;
  std::function<void(const TrainLogEntry&)> logger_;
};

/// Trains the contour detector on one-pixel mask boundaries with the
/// class-balanced loss.
WeightStore train_contour_model(const PipelineConfig& config, const std::vector<Sample>& samples,
                                const std::function<void(const TrainLogEntry&)>& logger = {});

// ---------------------------------------------------------------- inference

struct InferOptions {
  bool s1 = false;
  bool s2 = false;
  bool fused = true;
  bool contour = false;
  bool crf = false;
  bool multiscale = false;
  bool multilevel = true;
  bool crf_contour = true;  // embed the contour map in the CRF appearance kernel
  FusionMode fusion = FusionMode::kAttention;
};

struct InferResult {
  Tensor s1, s2, fused, contour, crf;  // empty unless requested; [1,1,H,W]
  int segmentations = 0;               // segmentation levels computed
  std::vector<std::string> warnings;
};

/// `image` is RGB [1,3,H,W] in [0,1], any size. `contour_model` is needed
/// for the contour map and for the contour-guided CRF.
InferResult infer(const PipelineConfig& config, const Model& model, const WeightStore* contour_model,
                  const Tensor& image, const InferOptions& options);

// ---------------------------------------------------------------- evaluation

/// Ablation variants: "s1", "s2", "fused_average", "fused_conv1x1", "fused",
/// "fused_single_level", "fused_multiscale", "crf_plain", "crf".
std::vector<std::string> all_variants();
/// Output selection for a named variant; throws on unknown names.
InferOptions variant_options(const PipelineConfig& config, const std::string& variant);
bool variant_needs_contour(const std::string& variant);

struct EvalReport {
  std::map<std::string, MetricSet> metrics;
  std::vector<MetricRow> rows;  // in variant order
};

/// Runs every variant on every sample and computes the metric suite. When
/// `out_dir` is non-empty writes metrics.csv, pr_<variant>.csv and
/// maps/<variant>/<image>.pgm.
EvalReport evaluate(const PipelineConfig& config, const Model& model, const WeightStore* contour_model,
                    const std::vector<Sample>& samples, const std::vector<std::string>& variants,
                    const std::string& dataset, const std::string& out_dir = {});

}  // namespace dcl
