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
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <random>

namespace dcl {
namespace {

using testing::random_tensor;

Index conv_params(Index in, Index out, Index k) { return in * out * k * k + out; }

TEST(NetworkSpec, DefaultParameterCountMatchesClosedForm) {
  const NetworkSpec spec = NetworkSpec::toy_default();
  const Index b = spec.branch_channels;
  Index expect = 0;
  expect += conv_params(3, 8, 3) + conv_params(8, 8, 3);
  expect += conv_params(8, 16, 3) + conv_params(16, 16, 3);
  expect += conv_params(16, 32, 3) + 2 * conv_params(32, 32, 3);
  expect += conv_params(32, 64, 3) + 2 * conv_params(64, 64, 3);
  expect += 3 * conv_params(64, 64, 3);
  expect += conv_params(64, 128, 3) + conv_params(128, 128, 1) + conv_params(128, 1, 1);
  for (Index in : {8, 16, 32, 64}) expect += conv_params(in, b, 3) + conv_params(b, b, 1) + conv_params(b, 1, 1);
  expect += conv_params(5, 1, 1);
  EXPECT_EQ(build_msfcn(spec, 1).parameter_count(), expect);
}

TEST(NetworkSpec, RejectsStructuralViolations) {
  NetworkSpec three = NetworkSpec::toy_default();
  three.branches.pop_back();
  try {
    three.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("4 side branches"), std::string::npos) << e.what();
  }
  NetworkSpec pools = NetworkSpec::toy_default();
  pools.stages[3].pool_stride = 2;
  EXPECT_THROW(pools.validate(), std::invalid_argument);
  NetworkSpec dil = NetworkSpec::toy_default();
  dil.stages[4].dilation = 1;
  EXPECT_THROW(dil.validate(), std::invalid_argument);
  NetworkSpec strides = NetworkSpec::toy_default();
  strides.branches[0].first_stride = 2;
  EXPECT_THROW(build_msfcn(strides, 1), std::invalid_argument);
}

TEST(Msfcn, SameSeedSameWeights) {
  const NetworkSpec spec = NetworkSpec::toy_default();
  EXPECT_EQ(build_msfcn(spec, 7), build_msfcn(spec, 7));
  EXPECT_FALSE(build_msfcn(spec, 7) == build_msfcn(spec, 8));
}

TEST(Msfcn, OutputDims) {
  const NetworkSpec spec = NetworkSpec::toy_default();
  std::mt19937_64 rng(1);
  const MsfcnOutput out = forward_msfcn(build_msfcn(spec, 1), spec, Var::constant(random_tensor({1, 3, 64, 64}, rng)));
  ASSERT_EQ(out.side_maps.size(), 5u);
  for (const Var& m : out.side_maps) EXPECT_EQ(m.dims(), (Shape{1, 1, 8, 8}));
  EXPECT_EQ(out.saliency.dims(), (Shape{1, 1, 64, 64}));
  EXPECT_EQ(out.features.dims(), (Shape{1, 64, 8, 8}));
}

TEST(Msfcn, StackedMapsShareDimsOverRandomSpecs) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<Index> convs(1, 3), width(2, 9);
  for (int t = 0; t < 6; ++t) {
    NetworkSpec spec = NetworkSpec::toy_default();
    for (auto& st : spec.stages) st.convs = convs(rng), st.channels = width(rng);
    spec.branch_channels = width(rng);
    spec.head_channels = width(rng);
    const Index h = 8 * (2 + t % 3), w = 8 * (3 - t % 2);
    const MsfcnOutput out = forward_msfcn(build_msfcn(spec, uint64_t(t)), spec, Var::constant(random_tensor({1, 3, h, w}, rng)));
    for (const Var& m : out.side_maps) EXPECT_EQ(m.dims(), (Shape{1, 1, h / 8, w / 8}));
  }
}

TEST(Msfcn, ZeroHeadGivesHalf) {
  const NetworkSpec spec = NetworkSpec::toy_default();
  WeightStore w = build_msfcn(spec, 3);
  w.at("msfcn.fuse.weight").mutable_value().data().setZero();
  w.at("msfcn.fuse.bias").mutable_value().data().setZero();
  std::mt19937_64 rng(3);
  const Tensor s = forward_msfcn(w, spec, Var::constant(random_tensor({1, 3, 32, 40}, rng))).saliency.value();
  EXPECT_TRUE((s.data() == 0.5).all());
}

TEST(Msfcn, ZeroBranchWeightsIsolateBackbone) {
  const NetworkSpec spec = NetworkSpec::toy_default();
  WeightStore w = build_msfcn(spec, 4);
  Tensor& fuse = w.at("msfcn.fuse.weight").mutable_value();
  for (Index c = 0; c < 4; ++c) fuse[c] = 0.0;
  std::mt19937_64 rng(4);
  const Var x = Var::constant(random_tensor({1, 3, 32, 32}, rng));
  const Tensor before = forward_msfcn(w, spec, x).saliency.value();
  for (int b = 1; b <= 4; ++b) {
    Tensor& t = w.at("msfcn.branch" + std::to_string(b) + ".conv3.weight").mutable_value();
    t = random_tensor(t.dims(), rng);
  }
  EXPECT_EQ(forward_msfcn(w, spec, x).saliency.value(), before);
}

TEST(Msfcn, ConstantImageGivesConstantInterior) {
  const NetworkSpec spec = NetworkSpec::toy_default();
  const WeightStore w = build_msfcn(spec, 5);
  const Tensor low = forward_msfcn(w, spec, Var::constant(Tensor({1, 3, 512, 512}, 0.3))).saliency_low.value();
  // Receptive field radius is under 200 pixels, i.e. 25 cells of the 64-cell map.
  const double ref = low.at(0, 0, 32, 32);
  for (Index i = 26; i < 38; ++i)
    for (Index j = 26; j < 38; ++j) EXPECT_NEAR(low.at(0, 0, i, j), ref, 1e-12);
}

TEST(Msfcn, RejectsNonMultipleInputButInferencePads) {
  const NetworkSpec spec = NetworkSpec::toy_default();
  const WeightStore w = build_msfcn(spec, 6);
  std::mt19937_64 rng(6);
  const Tensor odd = random_tensor({1, 3, 30, 21}, rng, 0, 1);
  EXPECT_THROW(forward_msfcn(w, spec, Var::constant(odd)), std::invalid_argument);
  EXPECT_EQ(infer_single_scale(w, spec, odd).dims(), (Shape{1, 1, 30, 21}));
}

TEST(Multiscale, SingleScaleEqualsForward) {
  const NetworkSpec spec = NetworkSpec::toy_default();
  const WeightStore w = build_msfcn(spec, 7);
  std::mt19937_64 rng(7);
  const Tensor img = random_tensor({1, 3, 48, 48}, rng, 0, 1);
  const Tensor once = infer_single_scale(w, spec, img);
  EXPECT_EQ(multiscale_infer(w, spec, img, {1.0}), once);
  EXPECT_EQ(multiscale_infer(w, spec, img, {1.0, 1.0, 1.0}), once);
}

TEST(Multiscale, DominatesEveryScale) {
  const NetworkSpec spec = NetworkSpec::toy_default();
  const WeightStore w = build_msfcn(spec, 8);
  std::mt19937_64 rng(8);
  const Tensor img = random_tensor({1, 3, 64, 64}, rng, 0, 1);
  const Tensor best = multiscale_infer(w, spec, img);
  for (Index side : {64, 48, 32}) {
    Tensor m = infer_single_scale(w, spec, side == 64 ? img : bilinear_resize(img, side, side));
    if (side != 64) m = bilinear_resize(m, 64, 64);
    EXPECT_TRUE((best.data() >= m.data()).all()) << "scale " << side;
  }
}

Tensor square_mask(Index n, Index lo, Index hi) {
  Tensor m = make_map(n, n);
  for (Index i = lo; i < hi; ++i)
    for (Index j = lo; j < hi; ++j) m.at(0, 0, i, j) = 1.0;
  return m;
}

TEST(ContourGt, Examples) {
  EXPECT_TRUE((prepare_contour_gt(make_map(5, 6)).data() == 0.0).all());

  const Tensor ring = prepare_contour_gt(square_mask(7, 2, 5));
  EXPECT_EQ(ring.data().sum(), 8.0);
  EXPECT_EQ(ring.at(0, 0, 3, 3), 0.0);

  const Tensor full = prepare_contour_gt(make_map(5, 4, 1.0));
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 4; ++j) {
      const bool border = i == 0 || j == 0 || i == 4 || j == 3;
      EXPECT_EQ(full.at(0, 0, i, j), border ? 1.0 : 0.0);
    }
}

}  // namespace
}  // namespace dcl
