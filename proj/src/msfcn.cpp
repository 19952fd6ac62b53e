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

#include "dcl/msfcn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace dcl {

NetworkSpec NetworkSpec::toy_default() {
  NetworkSpec spec;
  spec.stages = {{2, 8, 2, 1}, {2, 16, 2, 1}, {3, 32, 2, 1}, {3, 64, 1, 1}, {3, 64, 1, 2}};
  spec.branches = {{1, 4}, {2, 2}, {3, 1}, {4, 1}};
  return spec;
}

void NetworkSpec::validate() const {
  std::vector<std::string> errors;
  if (in_channels < 1) errors.push_back("in_channels must be >= 1");
  if (branch_channels < 1) errors.push_back("branch_channels must be >= 1");
  if (head_channels < 1) errors.push_back("head_channels must be >= 1");
  if (head_dilation != 4) errors.push_back("head layers must use dilation 4");

  static constexpr Index kPoolStrides[5] = {2, 2, 2, 1, 1};
  if (stages.size() != 5) {
    errors.push_back("expected exactly 5 backbone stages, got " + std::to_string(stages.size()));
  } else {
    for (size_t i = 0; i < 5; ++i) {
      const auto& s = stages[i];
      const std::string tag = "stage " + std::to_string(i + 1);
      if (s.convs < 1) errors.push_back(tag + ": needs at least one conv");
      if (s.channels < 1) errors.push_back(tag + ": channels must be >= 1");
      if (s.pool_stride != kPoolStrides[i]) {
        errors.push_back(tag + ": pool stride must be " + std::to_string(kPoolStrides[i]));
      }
      const Index want = (i > 0 && stages[i - 1].pool_stride == 1) ? 2 : 1;
      if (s.dilation != want) errors.push_back(tag + ": dilation must be " + std::to_string(want));
    }
  }

  if (branches.size() != 4) {
    errors.push_back("expected exactly 4 side branches, got " + std::to_string(branches.size()));
  } else {
    static constexpr Index kFirstStrides[4] = {4, 2, 1, 1};
    for (size_t i = 0; i < 4; ++i) {
      const std::string tag = "branch " + std::to_string(i + 1);
      if (branches[i].attach_stage != Index(i + 1)) {
        errors.push_back(tag + ": must attach after stage " + std::to_string(i + 1));
      }
      if (branches[i].first_stride != kFirstStrides[i]) {
        errors.push_back(tag + ": first-layer stride must be " + std::to_string(kFirstStrides[i]));
      }
    }
  }

  if (!errors.empty()) {
    std::ostringstream os;
    os << "invalid NetworkSpec:";
    for (const auto& e : errors) os << "\n  - " << e;
    throw std::invalid_argument(os.str());
  }
}

Index NetworkSpec::total_stride() const {
  Index s = 1;
  for (const auto& st : stages) s *= st.pool_stride;
  return s;
}

PoolGeometry pool_geometry(Index stride) {
  return stride == 1 ? PoolGeometry{3, 1, 1} : PoolGeometry{2, stride, 0};
}

std::vector<LayerDesc> msfcn_layers(const NetworkSpec& spec, const std::string& prefix) {
  spec.validate();
  std::vector<LayerDesc> layers;
  auto conv = [](Index in, Index out, Index k, Index stride, Index dilation) {
    ConvSpec c;
    c.in_channels = in;
    c.out_channels = out;
    c.kernel_h = c.kernel_w = k;
    c.stride = stride;
    c.dilation = dilation;
    c.padding = ConvSpec::same_padding(k, dilation);
    return c;
  };

  Index channels = spec.in_channels;
  for (size_t s = 0; s < spec.stages.size(); ++s) {
    const auto& st = spec.stages[s];
    for (Index c = 0; c < st.convs; ++c) {
      layers.push_back({prefix + "stage" + std::to_string(s + 1) + ".conv" + std::to_string(c + 1),
                        conv(channels, st.channels, 3, 1, st.dilation)});
      channels = st.channels;
    }
  }
  layers.push_back({prefix + "fc6", conv(channels, spec.head_channels, 3, 1, spec.head_dilation)});
  layers.push_back({prefix + "fc7", conv(spec.head_channels, spec.head_channels, 1, 1, spec.head_dilation)});
  layers.push_back({prefix + "score", conv(spec.head_channels, 1, 1, 1, 1)});

  for (size_t b = 0; b < spec.branches.size(); ++b) {
    const auto& br = spec.branches[b];
    const Index in = spec.stages[size_t(br.attach_stage - 1)].channels;
    const std::string name = prefix + "branch" + std::to_string(b + 1);
    layers.push_back({name + ".conv1", conv(in, spec.branch_channels, 3, br.first_stride, 1)});
    layers.push_back({name + ".conv2", conv(spec.branch_channels, spec.branch_channels, 1, 1, 1)});
    layers.push_back({name + ".conv3", conv(spec.branch_channels, 1, 1, 1, 1)});
  }
  layers.push_back({prefix + "fuse", conv(Index(spec.branches.size()) + 1, 1, 1, 1, 1)});
  return layers;
}

void init_conv_layers(WeightStore& store, const std::vector<LayerDesc>& layers, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& layer : layers) {
    const ConvSpec& c = layer.conv;
    const double taps = double(c.kernel_h * c.kernel_w);
    const double bound = std::sqrt(6.0 / (taps * double(c.in_channels + c.out_channels)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor w(c.weight_dims());
    for (Index i = 0; i < w.size(); ++i) w[i] = dist(rng);
    store.add(layer.name + ".weight", std::move(w));
    store.add(layer.name + ".bias", Tensor({c.out_channels}));
  }
}

WeightStore build_msfcn(const NetworkSpec& spec, std::uint64_t seed, const std::string& prefix) {
  WeightStore store;
  init_conv_layers(store, msfcn_layers(spec, prefix), seed);
  return store;
}

MsfcnOutput forward_msfcn(const WeightStore& weights, const NetworkSpec& spec, const Var& image,
                          const std::string& prefix) {
  const auto layers = msfcn_layers(spec, prefix);
  const Index stride = spec.total_stride();
  if (image.value().rank() != 4 || image.dim(0) != 1 || image.dim(1) != spec.in_channels) {
    throw std::invalid_argument("forward_msfcn: expected input [1," + std::to_string(spec.in_channels) +
                                ",H,W], got " + shape_str(image.dims()));
  }
  const Index h = image.dim(2), w = image.dim(3);
  if (h % stride != 0 || w % stride != 0) {
    throw std::invalid_argument("forward_msfcn: input " + std::to_string(h) + "x" + std::to_string(w) +
                                " is not a multiple of " + std::to_string(stride) + "; pad first");
  }

  size_t next = 0;
  auto apply = [&](const Var& x) {
    const LayerDesc& l = layers[next++];
    return dilated_conv2d(x, l.conv, weights.at(l.name + ".weight"), weights.at(l.name + ".bias"));
  };

  MsfcnOutput out;
  std::vector<Var> pools;
  Var x = image;
  for (const auto& st : spec.stages) {
    for (Index c = 0; c < st.convs; ++c) x = relu(apply(x));
    out.features = x;
    const PoolGeometry pg = pool_geometry(st.pool_stride);
    x = max_pool2d(x, pg.window, pg.stride, pg.padding);
    pools.push_back(x);
  }
  x = relu(apply(x));
  x = relu(apply(x));
  const Var score = apply(x);

  for (const auto& br : spec.branches) {
    Var b = relu(apply(pools[size_t(br.attach_stage - 1)]));
    b = relu(apply(b));
    out.side_maps.push_back(apply(b));
  }
  out.side_maps.push_back(score);
  for (const Var& m : out.side_maps) {
    if (m.dims() != score.dims()) {
      throw std::logic_error("forward_msfcn: side map " + shape_str(m.dims()) + " vs score map " +
                             shape_str(score.dims()));
    }
  }
  out.saliency_low = sigmoid(apply(stack_channels(out.side_maps)));
  out.saliency = bilinear_resize(out.saliency_low, h, w);
  return out;
}

Tensor reflect_pad_to_multiple(const Tensor& image, Index multiple) {
  const Index h = image.dim(2), w = image.dim(3);
  const Index ph = (h + multiple - 1) / multiple * multiple;
  const Index pw = (w + multiple - 1) / multiple * multiple;
  if (ph == h && pw == w) return image;
  auto reflect = [](Index i, Index n) {
    if (i < n) return i;
    const Index r = 2 * (n - 1) - i;
    return r >= 0 ? r : n - 1;
  };
  Tensor out({image.dim(0), image.dim(1), ph, pw});
  for (Index n = 0; n < image.dim(0); ++n) {
    for (Index c = 0; c < image.dim(1); ++c) {
      for (Index i = 0; i < ph; ++i) {
        for (Index j = 0; j < pw; ++j) out.at(n, c, i, j) = image.at(n, c, reflect(i, h), reflect(j, w));
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& t, Index height, Index width) {
  if (height > t.dim(2) || width > t.dim(3)) throw std::invalid_argument("crop: target larger than input");
  if (height == t.dim(2) && width == t.dim(3)) return t;
  Tensor out({t.dim(0), t.dim(1), height, width});
  for (Index n = 0; n < t.dim(0); ++n) {
    for (Index c = 0; c < t.dim(1); ++c) {
      for (Index i = 0; i < height; ++i) {
        for (Index j = 0; j < width; ++j) out.at(n, c, i, j) = t.at(n, c, i, j);
      }
    }
  }
  return out;
}

Tensor infer_single_scale(const WeightStore& weights, const NetworkSpec& spec, const Tensor& image,
                          const std::string& prefix) {
  const Tensor padded = reflect_pad_to_multiple(image, spec.total_stride());
  const MsfcnOutput out = forward_msfcn(weights, spec, Var::constant(padded), prefix);
  return crop(out.saliency.value(), image.dim(2), image.dim(3));
}

Tensor multiscale_infer(const WeightStore& weights, const NetworkSpec& spec, const Tensor& image,
                        const std::vector<double>& scales, const std::string& prefix) {
  if (scales.empty()) throw std::invalid_argument("multiscale_infer: no scales");
  const Index h = image.dim(2), w = image.dim(3);
  const Index min_side = spec.total_stride();
  Tensor best;
  for (double s : scales) {
    if (!(s > 0)) throw std::invalid_argument("multiscale_infer: scales must be positive");
    const Index sh = std::max(min_side, Index(std::lround(double(h) * s)));
    const Index sw = std::max(min_side, Index(std::lround(double(w) * s)));
    const Tensor scaled = (sh == h && sw == w) ? image : bilinear_resize(image, sh, sw);
    Tensor map = infer_single_scale(weights, spec, scaled, prefix);
    if (sh != h || sw != w) map = bilinear_resize(map, h, w);
    if (best.empty()) {
      best = std::move(map);
    } else {
      best.data() = best.data().max(map.data());
    }
  }
  return best;
}

Tensor prepare_contour_gt(const Tensor& mask) {
  if (mask.rank() != 4) throw std::invalid_argument("prepare_contour_gt: expected [1,1,H,W]");
  const Index h = mask.dim(2), w = mask.dim(3);
  Tensor out(mask.dims());
  auto fg = [&](Index i, Index j) { return i >= 0 && j >= 0 && i < h && j < w && mask.at(0, 0, i, j) >= 0.5; };
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) {
      if (!fg(i, j)) continue;
      if (!fg(i - 1, j) || !fg(i + 1, j) || !fg(i, j - 1) || !fg(i, j + 1)) out.at(0, 0, i, j) = 1.0;
    }
  }
  return out;
}

}  // namespace dcl
