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

#include "dcl/fusion.hpp"

#include <stdexcept>

namespace dcl {

FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "attention") return FusionMode::kAttention;
  if (name == "average") return FusionMode::kAverage;
  if (name == "conv1x1") return FusionMode::kConv1x1;
  throw std::invalid_argument("unknown fusion mode '" + name + "' (attention, average, conv1x1)");
}

std::string fusion_mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::kAttention: return "attention";
    case FusionMode::kAverage: return "average";
    case FusionMode::kConv1x1: return "conv1x1";
  }
  return "attention";
}

std::vector<LayerDesc> attention_layers(Index in_channels, Index hidden, const std::string& prefix) {
  ConvSpec c1{in_channels, hidden, 3, 3, 1, 1, 1};
  ConvSpec c2{hidden, 2, 1, 1, 1, 1, 0};
  c1.validate();
  c2.validate();
  return {{prefix + "conv1", c1}, {prefix + "conv2", c2}};
}

WeightStore build_attention(Index in_channels, Index hidden, std::uint64_t seed, const std::string& prefix) {
  WeightStore store;
  init_conv_layers(store, attention_layers(in_channels, hidden, prefix), seed);
  // Backbone activations are large, so random logits saturate the softmax;
  // a zero output layer starts the fusion as the plain average.
  store.at(prefix + "conv2.weight").mutable_value().data().setZero();
  return store;
}

AttentionWeights attention_forward(const Var& features, const WeightStore& weights, const std::string& prefix) {
  if (features.value().rank() != 4) throw std::invalid_argument("attention_forward: expected [1,C,h,w] features");
  const Var& w1 = weights.at(prefix + "conv1.weight");
  const Index hidden = w1.dim(0);
  const auto layers = attention_layers(features.dim(1), hidden, prefix);
  Var h = relu(dilated_conv2d(features, layers[0].conv, w1, weights.at(prefix + "conv1.bias")));
  h = dilated_conv2d(h, layers[1].conv, weights.at(prefix + "conv2.weight"), weights.at(prefix + "conv2.bias"));
  const Var p = softmax_channels(h);
  return {channel(p, 0), channel(p, 1)};
}

AttentionWeights average_weights(const Var& like) {
  const Var half = Var::constant(Tensor(like.dims(), 0.5));
  return {half, half};
}

Var fuse_low(const Var& s1_low, const Var& s2_low, const AttentionWeights& weights) {
  if (s1_low.dims() != s2_low.dims() || s1_low.dims() != weights.w1.dims() ||
      s1_low.dims() != weights.w2.dims()) {
    throw std::invalid_argument("fuse_saliency: S1 " + shape_str(s1_low.dims()) + ", S2 " +
                                shape_str(s2_low.dims()) + ", W1 " + shape_str(weights.w1.dims()) +
                                ", W2 " + shape_str(weights.w2.dims()) + " must match");
  }
  return weights.w1 * s1_low + weights.w2 * s2_low;
}

Var fuse_saliency(const Var& s1_low, const Var& s2_low, const AttentionWeights& weights, Index out_h,
                  Index out_w) {
  return bilinear_resize(fuse_low(s1_low, s2_low, weights), out_h, out_w);
}

Var fuse_saliency_full(const Var& s1_low, const Var& s2, const AttentionWeights& weights) {
  const Index h = s2.value().dim(2), w = s2.value().dim(3);
  const AttentionWeights up{bilinear_resize(weights.w1, h, w), bilinear_resize(weights.w2, h, w)};
  return fuse_low(bilinear_resize(s1_low, h, w), s2, up);
}

WeightStore build_conv_fusion(const std::string& prefix) {
  WeightStore store;
  store.add(prefix + "weight", Tensor({1, 2, 1, 1}, {6.0, 6.0}));
  store.add(prefix + "bias", Tensor({1}, {-6.0}));
  return store;
}

Var conv_fuse_low(const Var& s1_low, const Var& s2_low, const WeightStore& weights, const std::string& prefix) {
  if (s1_low.dims() != s2_low.dims()) {
    throw std::invalid_argument("conv_fuse_low: S1 " + shape_str(s1_low.dims()) + " vs S2 " +
                                shape_str(s2_low.dims()));
  }
  const ConvSpec spec{2, 1, 1, 1, 1, 1, 0};
  return sigmoid(dilated_conv2d(stack_channels({s1_low, s2_low}), spec, weights.at(prefix + "weight"),
                                weights.at(prefix + "bias")));
}

Tensor downsample_s2(const Tensor& s2, Index stride) { return area_downsample(s2, stride); }

FusionResolution parse_fusion_resolution(const std::string& name) {
  if (name == "low") return FusionResolution::kLow;
  if (name == "full") return FusionResolution::kFull;
  throw std::invalid_argument("unknown fusion resolution '" + name + "' (low, full)");
}

std::string fusion_resolution_name(FusionResolution r) { return r == FusionResolution::kLow ? "low" : "full"; }

Var fuse_streams(FusionMode mode, FusionResolution where, const Var& s1_low, const Tensor& s2,
                 const Var& features, const WeightStore& weights, Index stride) {
  const Index h = s2.dim(2), w = s2.dim(3);
  const bool low = where == FusionResolution::kLow;
  const Var a = low ? s1_low : bilinear_resize(s1_low, h, w);
  const Var b = Var::constant(low ? downsample_s2(s2, stride) : s2);
  Var fused;
  switch (mode) {
    case FusionMode::kAttention: {
      const AttentionWeights aw = attention_forward(features, weights);
      fused = low ? fuse_low(a, b, aw) : fuse_saliency_full(s1_low, b, aw);
      break;
    }
    case FusionMode::kAverage: fused = fuse_low(a, b, average_weights(a)); break;
    case FusionMode::kConv1x1: fused = conv_fuse_low(a, b, weights); break;
  }
  return low ? bilinear_resize(fused, h, w) : fused;
}

}  // namespace dcl
