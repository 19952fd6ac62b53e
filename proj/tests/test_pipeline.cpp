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

#include "dcl/image_io.hpp"
#include "dcl/pipeline.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

namespace dcl {
namespace {

namespace fs = std::filesystem;

// Fresh scratch directory per test, removed on exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) : path_(fs::temp_directory_path() / ("dcl_test_" + tag)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

template <typename F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

// Small, fast schedule for smoke runs.
PipelineConfig smoke_config() {
  PipelineConfig c;
  c.train.alternations = 1;
  c.train.warmup_epochs = 1;
  c.train.mlp_init_epochs = 2;
  return c;
}

// ---------------------------------------------------------------- config

TEST(Config, DefaultsRoundTripThroughText) {
  const PipelineConfig c;
  const std::string text = config_to_text(c);
  EXPECT_EQ(config_to_text(parse_config(text)), text);
  EXPECT_EQ(config_keys().size(), size_t(std::count(text.begin(), text.end(), '\n')));
}

TEST(Config, ParsesValuesCommentsAndBlankLines) {
  const PipelineConfig c = parse_config("# toy\n\nseed = 7\n  train.alternations=3  \nfusion.mode = average\n"
                                        "infer.multiscale = on\nseg.level2.k = 55.5\n");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.train.alternations, 3);
  EXPECT_EQ(c.fusion, FusionMode::kAverage);
  EXPECT_TRUE(c.multiscale);
  EXPECT_EQ(c.seg[1].k, 55.5);
}

TEST(Config, RejectsUnknownKeysNamingTheLine) {
  const std::string e = error_of([] { parse_config("seed = 1\ntrain.lr_nwe = 0.1\n", "a.cfg"); });
  EXPECT_TRUE(contains(e, "a.cfg:2")) << e;
  EXPECT_TRUE(contains(e, "train.lr_nwe")) << e;
}

TEST(Config, RejectsDuplicatesBadValuesAndInvalidFields) {
  EXPECT_THROW(parse_config("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse_config("seed = x\n"), ConfigError);
  EXPECT_THROW(parse_config("seed\n"), ConfigError);
  EXPECT_THROW(parse_config("fusion.mode = vote\n"), ConfigError);
  EXPECT_THROW(parse_config("train.lr_new = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("crf.sigma_alpha = 0\n"), ConfigError);
}

// ---------------------------------------------------------------- weights

WeightStore sample_store() {
  WeightStore w;
  w.add("a.weight", Tensor({2, 3}, {1.5, -2.0, 0.1, 1e-300, -0.0, 3.25}));
  w.add("b", Tensor({1}, {42.0}));
  w.add("c.conv", Tensor({1, 2, 1, 1}, {0.3, 0.7}));
  return w;
}

TEST(Weights, RoundTripIsBitExact) {
  TempDir dir("weights_rt");
  Model m = build_model(PipelineConfig{});
  save_weights(m.weights, dir / "m.dclw");
  const WeightStore back = load_weights(dir / "m.dclw");
  ASSERT_EQ(back.size(), m.weights.size());
  for (const auto& [name, v] : m.weights.entries()) {
    const Tensor& a = v.value();
    const Tensor& b = back.at(name).value();
    ASSERT_EQ(a.dims(), b.dims()) << name;
    EXPECT_EQ(std::memcmp(a.ptr(), b.ptr(), sizeof(double) * size_t(a.size())), 0) << name;
  }
}

TEST(Weights, ByteLayoutMatchesHandEncoding) {
  TempDir dir("weights_layout");
  WeightStore w;
  w.add("ab", Tensor({2}, {1.0, -2.0}));
  save_weights(w, dir / "x.dclw");
  std::string expect = "DCLW";
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) expect.push_back(char((v >> (8 * i)) & 0xff));
  };
  u32(1);
  u32(1);
  expect += std::string("\x02\x00", 2) + "ab" + std::string("\x01", 1);
  u32(2);
  // 1.0 and -2.0 as little-endian IEEE doubles.
  expect += std::string("\x00\x00\x00\x00\x00\x00\xf0\x3f", 8);
  expect += std::string("\x00\x00\x00\x00\x00\x00\x00\xc0", 8);
  EXPECT_EQ(slurp(dir / "x.dclw"), expect);
}

TEST(Weights, RejectsTruncationVersionAndMagic) {
  TempDir dir("weights_bad");
  save_weights(sample_store(), dir / "ok.dclw");
  const std::string bytes = slurp(dir / "ok.dclw");

  spit(dir / "short.dclw", bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(load_weights(dir / "short.dclw"), WeightFormatError);
  const std::string e = error_of([&] { load_weights(dir / "short.dclw"); });
  EXPECT_TRUE(contains(e, "short.dclw")) << e;

  std::string v2 = bytes;
  v2[4] = 2;
  spit(dir / "v2.dclw", v2);
  EXPECT_TRUE(contains(error_of([&] { load_weights(dir / "v2.dclw"); }), "version"));

  std::string magic = bytes;
  magic[0] = 'X';
  spit(dir / "magic.dclw", magic);
  EXPECT_THROW(load_weights(dir / "magic.dclw"), WeightFormatError);
}

// ---------------------------------------------------------------- images

TEST(ImageIo, ColourAndGreyRoundTrip) {
  TempDir dir("images");
  std::mt19937_64 rng(3);
  Raster rgb{5, 3, 3, 255, {}};
  for (int i = 0; i < 45; ++i) rgb.samples.push_back(std::uint16_t(rng() % 256));
  write_netpbm(dir / "a.ppm", rgb);
  const Raster back = read_netpbm(dir / "a.ppm");
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.height, 3);
  EXPECT_EQ(back.channels, 3);
  EXPECT_EQ(back.samples, rgb.samples);
  EXPECT_EQ(slurp(dir / "a.ppm").substr(0, 2), "P6");

  const Tensor t = read_image(dir / "a.ppm");
  ASSERT_EQ(t.dims(), (std::vector<Index>{1, 3, 3, 5}));
  // Interleaved samples become planes.
  EXPECT_EQ(t[1 * 15 + 2 * 5 + 4], rgb.samples[size_t((2 * 5 + 4) * 3 + 1)] / 255.0);

  write_ppm(dir / "b.ppm", t);
  EXPECT_EQ(read_netpbm(dir / "b.ppm").samples, rgb.samples);
}

TEST(ImageIo, SaliencyAndLabelOutputs) {
  TempDir dir("outputs");
  const Tensor map({1, 1, 1, 4}, {-0.5, 0.2, 0.5, 1.7});
  write_saliency_pgm(dir / "s.pgm", map);
  const Raster s = read_netpbm(dir / "s.pgm");
  EXPECT_EQ(s.maxval, 255);
  EXPECT_EQ(s.samples, (std::vector<std::uint16_t>{0, 51, 128, 255}));

  write_label_pgm(dir / "l.pgm", 1, 3, {0, 300, 65535});
  const std::string bytes = slurp(dir / "l.pgm");
  EXPECT_EQ(bytes.substr(0, 2), "P5");
  // 16-bit netpbm samples are big-endian.
  EXPECT_EQ(bytes.substr(bytes.size() - 6), std::string("\x00\x00\x01\x2c\xff\xff", 6));
  EXPECT_EQ(read_netpbm(dir / "l.pgm").samples, (std::vector<std::uint16_t>{0, 300, 65535}));
  EXPECT_THROW(write_label_pgm(dir / "x.pgm", 1, 1, {70000}), std::invalid_argument);
}

TEST(ImageIo, MaskThresholdAndMalformedFiles) {
  TempDir dir("masks");
  write_netpbm(dir / "m.pgm", Raster{4, 1, 1, 255, {0, 127, 128, 255}});
  const Tensor m = read_mask(dir / "m.pgm");
  EXPECT_EQ(std::vector<double>(m.ptr(), m.ptr() + 4), (std::vector<double>{0, 0, 1, 1}));
  spit(dir / "bad.pgm", "P2\n1 1\n255\n0\n");
  EXPECT_THROW(read_netpbm(dir / "bad.pgm"), ImageFormatError);
  spit(dir / "short.pgm", "P5\n4 4\n255\n\x01\x02");
  EXPECT_THROW(read_netpbm(dir / "short.pgm"), ImageFormatError);
}

// ---------------------------------------------------------------- datasets

TEST(Dataset, SyntheticCorpusIsDeterministicAndConsistent) {
  TempDir a("synth_a"), b("synth_b");
  const DatasetManifest ma = generate_synthetic_dataset(6, 9, a.path().string());
  const DatasetManifest mb = generate_synthetic_dataset(6, 9, b.path().string());
  ASSERT_EQ(ma.entries.size(), 6u);
  for (size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(slurp(ma.entries[i].image), slurp(mb.entries[i].image));
    EXPECT_EQ(slurp(ma.entries[i].mask), slurp(mb.entries[i].mask));
  }
  EXPECT_EQ(slurp(a / "manifest.txt"), slurp(b / "manifest.txt"));

  const auto disk = load_samples(read_manifest(a / "manifest.txt"));
  const auto memory = synthesize_samples(6, 9);
  ASSERT_EQ(disk.size(), memory.size());
  for (size_t i = 0; i < disk.size(); ++i) {
    EXPECT_EQ(disk[i].image.dims(), (std::vector<Index>{1, 3, 64, 64}));
    EXPECT_EQ(disk[i].mask.dims(), (std::vector<Index>{1, 1, 64, 64}));
    EXPECT_GT(disk[i].mask.data().sum(), 0.0);
    // The PPM stores 8-bit samples of the in-memory image.
    EXPECT_LE((disk[i].image.data() - memory[i].image.data()).abs().maxCoeff(), 0.5 / 255.0 + 1e-12);
    EXPECT_EQ(disk[i].mask.data().matrix(), memory[i].mask.data().matrix());
  }
  TempDir empty("synth_empty");
  EXPECT_TRUE(generate_synthetic_dataset(0, 1, empty.path().string()).entries.empty());
}

TEST(Dataset, ManifestPathsAreRelativeToTheManifest) {
  TempDir dir("manifest");
  fs::create_directories(dir.path() / "data" / "img");
  generate_synthetic_dataset(2, 1, (dir.path() / "data" / "img").string());
  DatasetManifest m = read_manifest((dir.path() / "data" / "img" / "manifest.txt").string());
  write_manifest(dir / "list.txt", m);
  const std::string text = slurp(dir / "list.txt");
  EXPECT_TRUE(contains(text, "data/img/img_0000.ppm\tdata/img/mask_0000.pgm\n")) << text;
  const DatasetManifest back = read_manifest(dir / "list.txt");
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_TRUE(fs::equivalent(back.entries[1].image, m.entries[1].image));

  spit(dir / "broken.txt", "data/img/img_0000.ppm data/img/mask_0000.pgm\n");
  EXPECT_TRUE(contains(error_of([&] { read_manifest(dir / "broken.txt"); }), ":1"));
  spit(dir / "missing.txt", "nope.ppm\tnope.pgm\n");
  EXPECT_TRUE(contains(error_of([&] { read_manifest(dir / "missing.txt"); }), "nope.ppm"));
}

// ---------------------------------------------------------------- training

std::map<std::string, Tensor> snapshot(const WeightStore& w, const std::string& prefix) {
  std::map<std::string, Tensor> out;
  for (const auto& [name, v] : w.entries()) {
    if (name.rfind(prefix, 0) == 0) out.emplace(name, v.value());
  }
  return out;
}

bool same_bits(const std::map<std::string, Tensor>& a, const std::map<std::string, Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, t] : a) {
    const Tensor& u = b.at(name);
    if (t.dims() != u.dims() || std::memcmp(t.ptr(), u.ptr(), sizeof(double) * size_t(t.size())) != 0) return false;
  }
  return true;
}

TEST(Training, PhasesRespectTheFreezeContract) {
  const PipelineConfig c = smoke_config();
  AlternateTrainer t(c, synthesize_samples(4, 21), build_model(c));
  const char* stream1[] = {"msfcn.", "attn.", "fuse1x1."};
  const char* stream2[] = {"mlp.", "segnorm."};

  auto before = [&](const char* p) { return snapshot(t.model().weights, p); };
  std::map<std::string, std::map<std::string, Tensor>> s;
  for (const char* p : stream1) s[p] = before(p);
  t.train_segment_stream(1, true);
  for (const char* p : stream1) EXPECT_TRUE(same_bits(s[p], before(p))) << p << " moved in the segment phase";
  EXPECT_FALSE(same_bits(snapshot(build_model(c).weights, "mlp."), before("mlp.")));

  for (const char* p : stream2) s[p] = before(p);
  s["msfcn."] = before("msfcn.");
  t.train_fused_epoch();
  for (const char* p : stream2) EXPECT_TRUE(same_bits(s[p], before(p))) << p << " moved in the fused phase";
  EXPECT_FALSE(same_bits(s["msfcn."], before("msfcn.")));

  s["attn."] = before("attn.");
  s["mlp."] = before("mlp.");
  t.warmup_epoch();
  EXPECT_TRUE(same_bits(s["attn."], before("attn.")));
  EXPECT_TRUE(same_bits(s["mlp."], before("mlp.")));
}

TEST(Training, SmokeRunLowersLossAndIsDeterministic) {
  const PipelineConfig c = smoke_config();
  const auto samples = synthesize_samples(8, 22);
  TempDir dir("train_ckpt");
  AlternateTrainer a(c, samples, build_model(c));
  const Model ma = a.run(dir.path().string());
  AlternateTrainer b(c, samples, build_model(c));
  const Model mb = b.run();
  EXPECT_TRUE(ma.weights == mb.weights);

  // Fused loss of the trained model against the untrained one.
  auto fused_loss = [&](const Model& m) {
    AlternateTrainer probe(c, samples, m);
    return probe.train_fused_epoch();
  };
  EXPECT_LT(fused_loss(ma), fused_loss(build_model(c)));

  const auto& h = a.history();
  ASSERT_FALSE(h.empty());
  EXPECT_EQ(h.front().phase, "warmup");
  EXPECT_EQ(h.back().phase, "mlp");
  // warmup, mlp_init, then one fcn and one mlp checkpoint per alternation.
  for (const char* f : {"phase_00_warmup.dclw", "phase_01_mlp_init.dclw", "phase_02_fcn_r1.dclw", "phase_03_mlp_r1.dclw"}) {
    EXPECT_TRUE(fs::exists(dir.path() / f)) << f;
  }
  EXPECT_TRUE(load_weights(dir.path() / "phase_03_mlp_r1.dclw") == ma.weights);
}

TEST(Training, NonFiniteLossAbortsKeepingLastCheckpoint) {
  PipelineConfig c = smoke_config();
  c.train.lr_mlp = 1e200;
  TempDir dir("train_nan");
  AlternateTrainer t(c, synthesize_samples(4, 23), build_model(c));
  EXPECT_THROW(t.run(dir.path().string()), NonFiniteError);
  ASSERT_TRUE(fs::exists(dir.path() / "phase_00_warmup.dclw"));
  EXPECT_NO_THROW(load_weights(dir.path() / "phase_00_warmup.dclw"));
}

TEST(Training, RejectsMixedSizesAndEmptyCorpus) {
  const PipelineConfig c = smoke_config();
  auto samples = synthesize_samples(1, 1, 64);
  const auto other = synthesize_samples(1, 2, 48);
  samples.push_back(other[0]);
  EXPECT_THROW(AlternateTrainer(c, samples, build_model(c)), std::invalid_argument);
  EXPECT_THROW(AlternateTrainer(c, {}, build_model(c)), std::invalid_argument);
}

// ---------------------------------------------------------------- inference

TEST(Inference, StreamOneOnlySkipsSegmentation) {
  const PipelineConfig c;
  const Model m = build_model(c);
  const Tensor image = synthesize_samples(1, 5, 40)[0].image;
  InferOptions o;
  o.fused = false;
  o.s1 = true;
  const InferResult r = infer(c, m, nullptr, image, o);
  EXPECT_EQ(r.segmentations, 0);
  EXPECT_EQ(r.s1.dims(), (std::vector<Index>{1, 1, 40, 40}));
  EXPECT_TRUE(r.fused.empty());
  EXPECT_TRUE(r.s2.empty());
}

TEST(Inference, OutputsHaveImageSizeAndRange) {
  const PipelineConfig c;
  const Model m = build_model(c);
  Tensor image({1, 3, 37, 50});
  std::mt19937_64 rng(4);
  for (Index i = 0; i < image.size(); ++i) image[i] = double(rng() % 256) / 255.0;
  InferOptions o;
  o.s1 = o.s2 = true;
  const InferResult r = infer(c, m, nullptr, image, o);
  EXPECT_EQ(r.segmentations, 3);
  for (const Tensor* t : {&r.s1, &r.s2, &r.fused}) {
    ASSERT_EQ(t->dims(), (std::vector<Index>{1, 1, 37, 50}));
    EXPECT_GE(t->data().minCoeff(), 0.0);
    EXPECT_LE(t->data().maxCoeff(), 1.0);
  }
  o.multilevel = false;
  EXPECT_EQ(infer(c, m, nullptr, image, o).segmentations, 1);
}

TEST(Inference, ZeroWeightCrfReturnsTheFusedMap) {
  PipelineConfig c;
  c.crf.w1 = 0.0;
  c.crf.w2 = 0.0;
  const Model m = build_model(c);
  const WeightStore contour = build_contour_model(c);
  const Tensor image = synthesize_samples(1, 6, 24)[0].image;
  InferOptions o;
  o.crf = true;
  const InferResult r = infer(c, m, &contour, image, o);
  ASSERT_EQ(r.crf.dims(), r.fused.dims());
  EXPECT_LE((r.crf.data() - r.fused.data()).abs().maxCoeff(), 1e-12);
  o.crf_contour = false;
  const InferResult plain = infer(c, m, nullptr, image, o);
  EXPECT_LE((plain.crf.data() - plain.fused.data()).abs().maxCoeff(), 1e-12);
}

TEST(Inference, ContourNeedsWeightsAndRgbInput) {
  const PipelineConfig c;
  const Model m = build_model(c);
  InferOptions o;
  o.crf = true;
  EXPECT_THROW(infer(c, m, nullptr, synthesize_samples(1, 6, 16)[0].image, o), std::invalid_argument);
  EXPECT_THROW(infer(c, m, nullptr, Tensor({1, 1, 16, 16}), InferOptions{}), std::invalid_argument);
}

// ---------------------------------------------------------------- evaluation

TEST(Evaluate, VariantsMirrorTheAblationRows) {
  const auto v = all_variants();
  const std::vector<std::string> expect{"s1",  "s2", "fused_average", "fused_conv1x1", "fused", "fused_single_level",
                                        "fused_multiscale", "crf_plain", "crf"};
  EXPECT_EQ(v, expect);
  const PipelineConfig c;
  EXPECT_EQ(variant_options(c, "fused_average").fusion, FusionMode::kAverage);
  EXPECT_FALSE(variant_options(c, "fused_single_level").multilevel);
  EXPECT_TRUE(variant_options(c, "fused_multiscale").multiscale);
  EXPECT_FALSE(variant_options(c, "crf_plain").crf_contour);
  EXPECT_TRUE(variant_needs_contour("crf"));
  EXPECT_TRUE(contains(error_of([&] { variant_options(c, "fusion"); }), "fused_average"));
}

TEST(Evaluate, WritesReportsThatReadBack) {
  TempDir dir("evaluate");
  const PipelineConfig c;
  const Model m = build_model(c);
  const auto samples = synthesize_samples(3, 8, 32);
  const std::vector<std::string> variants{"s1", "fused", "fused_average"};
  const EvalReport r = evaluate(c, m, nullptr, samples, variants, "toy", dir.path().string());
  EXPECT_EQ(r.rows.size(), variants.size() * 5);
  EXPECT_EQ(read_metrics_csv(dir / "metrics.csv"), r.rows);
  for (const auto& v : variants) {
    EXPECT_TRUE(fs::exists(dir.path() / ("pr_" + v + ".csv")));
    for (const auto& s : samples) EXPECT_TRUE(fs::exists(dir.path() / "maps" / v / (s.name + ".pgm"))) << v;
  }
  EXPECT_THROW(evaluate(c, m, nullptr, samples, {"s1", "s1"}, "toy"), std::invalid_argument);
}

}  // namespace
}  // namespace dcl
