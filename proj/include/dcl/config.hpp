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

#include "dcl/crf.hpp"
#include "dcl/fusion.hpp"
#include "dcl/msfcn.hpp"
#include "dcl/segmentation.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int alternations = 8;
  int warmup_epochs = 2;      // MS-FCN epochs on its own output before alternation
  int mlp_init_epochs = 30;   // segment stream alone, on initial features
  int mlp_epochs = 1;         // per alternation
  int fcn_epochs = 1;         // per alternation
  int batch_images = 4;       // segment stream batch
  bool flip = true;
  double lr_new = 0.05;       // head, branches, fusion, attention
  double lr_backbone = 0.05;  // backbone stages
  double lr_mlp = 0.05;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double power = 0.9;
};

struct ContourTrainConfig {
  int epochs = 4;
  double lr_new = 0.05;
  double lr_backbone = 0.05;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  Index image_size = 64;  // training images are resized to this square size
  NetworkSpec net = NetworkSpec::toy_default();
  Index attn_hidden = 32;
  Index mlp_hidden = 64;
  std::array<SegmentParams, 3> seg{SegmentParams{20.0, 8, 0.5}, SegmentParams{40.0, 12, 0.5},
                                   SegmentParams{80.0, 20, 0.5}};
  Index seg_level = 1;  // level used when multi-level segmentation is off
  FusionMode fusion = FusionMode::kAttention;
  FusionResolution fusion_resolution = FusionResolution::kLow;
  bool multiscale = false;
  std::vector<double> scales{1.0, 0.75, 0.5};
  // Kernels are unnormalised, so the reference weights and widths swamp the
  // unary on 64 px images (maxF 0.36). Toy values, picked on held-out data.
  CrfConfig crf{.w1 = 0.03, .w2 = 0.03, .sigma_alpha = 1.5, .sigma_beta = 50.0, .sigma_gamma = 3.0,
                .sigma_epsilon = 4.5};
  TrainConfig train;
  ContourTrainConfig contour;

  /// Throws ConfigError listing every invalid field.
  void validate() const;
};

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// ignored; unknown keys, duplicate keys and unparsable values are errors
/// naming the line.
PipelineConfig parse_config(const std::string& text, const std::string& origin = "<config>");
PipelineConfig load_config(const std::string& path);
/// Every key with its current value, in parse_config syntax.
std::string config_to_text(const PipelineConfig& config);
std::vector<std::string> config_keys();

}  // namespace dcl
