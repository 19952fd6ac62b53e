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

// dcl: synthetic data, training, inference, CRF refinement, evaluation and
// segmentation from the command line. Every command overwrites its outputs,
// so reruns over unchanged inputs reproduce the same files.

#include "dcl/crf.hpp"
#include "dcl/image_io.hpp"
#include "dcl/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace dcl;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string multiscale;  // "", "on" or "off"
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "overrides the configured seed");
}

void add_multiscale(CLI::App* cmd, Common& c) {
  cmd->add_option("--multiscale", c.multiscale, "multi-scale input for stream 1")
      ->check(CLI::IsMember({"on", "off"}));
}

PipelineConfig resolve(const Common& c) {
  PipelineConfig config = c.config_path.empty() ? PipelineConfig{} : load_config(c.config_path);
  if (c.seed) config.seed = *c.seed;
  if (!c.multiscale.empty()) config.multiscale = c.multiscale == "on";
  config.validate();
  return config;
}

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

void log_entry(const TrainLogEntry& e) {
  std::cerr << e.phase << " round " << e.round << " epoch " << e.epoch << " loss " << e.loss << '\n';
}

void write_log(const std::string& path, const std::vector<TrainLogEntry>& history) {
  std::ofstream out(path);
  out << "phase,round,epoch,loss\n" << std::setprecision(17);
  for (const auto& e : history) out << e.phase << ',' << e.round << ',' << e.epoch << ',' << e.loss << '\n';
}

// ---------------------------------------------------------------- commands

int run_synth(Index count, Index size, const std::string& split, const Common& c, const std::string& out) {
  const PipelineConfig config = resolve(c);
  const DatasetManifest m = generate_synthetic_dataset(count, config.seed, out, size, split);
  std::cout << "wrote " << m.entries.size() << " images to " << (fs::path(out) / "manifest.txt").string() << '\n';
  return 0;
}

int run_train(const std::string& manifest, const std::string& init, const Common& c, const std::string& out) {
  const PipelineConfig config = resolve(c);
  const auto samples = load_samples(read_manifest(manifest), config.image_size);
  Model model = init.empty() ? build_model(config) : Model{load_weights(init)};
  fs::create_directories(out);
  AlternateTrainer trainer(config, samples, std::move(model));
  trainer.set_logger(log_entry);
  const Model trained = trainer.run((fs::path(out) / "checkpoints").string());
  save_weights(trained.weights, fs::path(out) / "model.dclw");
  write_log((fs::path(out) / "train_log.csv").string(), trainer.history());
  std::ofstream(fs::path(out) / "config.txt") << config_to_text(config);
  std::cout << "saved " << (fs::path(out) / "model.dclw").string() << '\n';
  return 0;
}

int run_train_contour(const std::string& manifest, const Common& c, const std::string& out) {
  const PipelineConfig config = resolve(c);
  const auto samples = load_samples(read_manifest(manifest), config.image_size);
  const WeightStore w = train_contour_model(config, samples, log_entry);
  fs::create_directories(out);
  save_weights(w, fs::path(out) / "contour.dclw");
  std::cout << "saved " << (fs::path(out) / "contour.dclw").string() << '\n';
  return 0;
}

int run_infer(const std::vector<std::string>& images, const std::string& weights, const std::string& contour_path,
              const std::string& variant, bool no_crf, const Common& c, const std::string& out) {
  const PipelineConfig config = resolve(c);
  const Model model{load_weights(weights)};
  std::optional<WeightStore> contour;
  if (!contour_path.empty()) contour = load_weights(contour_path);

  std::string v = variant;
  if (v.empty()) v = contour && !no_crf ? "crf" : "fused";
  if (no_crf && (v == "crf" || v == "crf_plain")) throw std::invalid_argument("--no-crf conflicts with --variant " + v);
  InferOptions o = variant_options(config, v);
  if (contour) o.contour = true;

  fs::create_directories(out);
  for (const auto& path : images) {
    const InferResult r = infer(config, model, contour ? &*contour : nullptr, read_image(path), o);
    const Tensor& map = o.crf ? r.crf : o.fused ? r.fused : o.s2 ? r.s2 : r.s1;
    const fs::path dst = fs::path(out) / (stem(path) + ".pgm");
    write_saliency_pgm(dst.string(), map);
    if (o.contour) write_saliency_pgm((fs::path(out) / (stem(path) + "_contour.pgm")).string(), r.contour);
    for (const auto& w : r.warnings) std::cerr << path << ": " << w << '\n';
    std::cout << dst.string() << '\n';
  }
  return 0;
}

int run_crf(const std::string& image_path, const std::string& saliency_path, const std::string& contour_path,
            bool plain, const Common& c, const std::string& out) {
  const PipelineConfig config = resolve(c);
  const Tensor image = read_image(image_path);
  const Tensor saliency = read_image(saliency_path);
  if (saliency.dim(1) != 1) throw std::invalid_argument(saliency_path + ": saliency map must be a PGM");
  if (saliency.dim(2) != image.dim(2) || saliency.dim(3) != image.dim(3)) {
    throw std::invalid_argument(saliency_path + ": size differs from " + image_path);
  }
  Tensor refined;
  if (plain) {
    refined = mean_field_infer(saliency, image, RowMatrixXd(), config.crf);
  } else {
    if (contour_path.empty()) throw std::invalid_argument("crf: --weights (contour model) or --plain is required");
    const WeightStore contour = load_weights(contour_path);
    const Tensor m = infer_single_scale(contour, config.net, image_to_input(image), "contour.");
    std::vector<std::string> warnings;
    refined = crf_refine(saliency, image, m, config.crf, &warnings);
    for (const auto& w : warnings) std::cerr << image_path << ": " << w << '\n';
  }
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  write_saliency_pgm(out, refined);
  std::cout << out << '\n';
  return 0;
}

int run_eval(const std::string& manifest, const std::string& weights, const std::string& contour_path,
             std::vector<std::string> variants, bool no_crf, const std::string& dataset, Index size,
             const Common& c, const std::string& out) {
  const PipelineConfig config = resolve(c);
  const Model model{load_weights(weights)};
  std::optional<WeightStore> contour;
  if (!contour_path.empty()) contour = load_weights(contour_path);
  if (variants.empty()) {
    for (const auto& v : all_variants()) {
      const bool crf = v == "crf" || v == "crf_plain";
      if (crf && no_crf) continue;
      if (variant_needs_contour(v) && !contour) continue;
      variants.push_back(v);
    }
  }
  for (const auto& v : variants) {
    if (no_crf && (v == "crf" || v == "crf_plain")) throw std::invalid_argument("--no-crf conflicts with variant " + v);
    if (variant_needs_contour(v) && !contour) throw std::invalid_argument("variant " + v + " needs --contour-weights");
  }
  const auto samples = load_samples(read_manifest(manifest), size);
  const std::string name = dataset.empty() ? fs::path(manifest).parent_path().filename().string() : dataset;
  const EvalReport r = evaluate(config, model, contour ? &*contour : nullptr, samples, variants, name, out);
  for (const auto& v : variants) {
    const MetricSet& m = r.metrics.at(v);
    std::cout << v << ": maxF " << m.max_f << " adaptiveF " << m.adaptive.f << " MAE " << m.mae << '\n';
  }
  return 0;
}

int run_segment(const std::string& image_path, const Common& c, const std::string& out) {
  const PipelineConfig config = resolve(c);
  const auto levels = segment_levels(config, read_image(image_path));
  fs::create_directories(out);
  Index total = 0;
  for (size_t l = 0; l < levels.size(); ++l) {
    const fs::path dst = fs::path(out) / (stem(image_path) + "_level" + std::to_string(l + 1) + ".pgm");
    write_label_pgm(dst.string(), levels[l].height, levels[l].width, levels[l].labels);
    std::cout << dst.string() << ": " << levels[l].count() << " segments\n";
    total += levels[l].count();
  }
  std::cout << "total " << total << " segments\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stream salient object detection: training, inference and evaluation"};
  app.require_subcommand(1);

  Common common;
  std::string out, weights, contour, variant, manifest, image, saliency, split = "train", dataset;
  std::vector<std::string> images, variants;
  Index count = 200, size = 64, eval_size = 0;
  bool no_crf = false, plain = false;

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus and its manifest");
  add_common(synth, common);
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--count", count, "number of images")->check(CLI::NonNegativeNumber);
  synth->add_option("--size", size, "image side in pixels")->check(CLI::PositiveNumber);
  synth->add_option("--split", split, "split tag written to the manifest");

  auto* train = app.add_subcommand("train", "alternating two-stream training");
  add_common(train, common);
  train->add_option("manifest", manifest, "training manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "output directory (model.dclw, checkpoints/, train_log.csv)")->required();
  train->add_option("--weights", weights, "initial weights instead of a fresh model")->check(CLI::ExistingFile);

  auto* train_contour = app.add_subcommand("train-contour", "train the salient contour detector");
  add_common(train_contour, common);
  train_contour->add_option("manifest", manifest, "training manifest")->required()->check(CLI::ExistingFile);
  train_contour->add_option("--out", out, "output directory (contour.dclw)")->required();

  auto* inf = app.add_subcommand("infer", "saliency maps for images");
  add_common(inf, common);
  add_multiscale(inf, common);
  inf->add_option("images", images, "P5/P6 images")->required()->check(CLI::ExistingFile);
  inf->add_option("--weights", weights, "detector weights")->required()->check(CLI::ExistingFile);
  inf->add_option("--contour-weights", contour, "contour detector weights")->check(CLI::ExistingFile);
  inf->add_option("--out", out, "output directory")->required();
  inf->add_option("--variant", variant, "output to write (s1, s2, fused, crf, ...)");
  inf->add_flag("--no-crf", no_crf, "skip CRF refinement");

  auto* crf = app.add_subcommand("crf", "refine an existing saliency map");
  add_common(crf, common);
  crf->add_option("image", image, "P5/P6 image")->required()->check(CLI::ExistingFile);
  crf->add_option("saliency", saliency, "8-bit saliency PGM of the same size")->required()->check(CLI::ExistingFile);
  crf->add_option("--weights", contour, "contour detector weights")->check(CLI::ExistingFile);
  crf->add_flag("--plain", plain, "no contour embedding in the appearance kernel");
  crf->add_option("--out", out, "output PGM")->required();

  auto* eval = app.add_subcommand("eval", "metrics for every variant over a manifest");
  add_common(eval, common);
  add_multiscale(eval, common);
  eval->add_option("manifest", manifest, "test manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--weights", weights, "detector weights")->required()->check(CLI::ExistingFile);
  eval->add_option("--contour-weights", contour, "contour detector weights")->check(CLI::ExistingFile);
  eval->add_option("--out", out, "report directory")->required();
  eval->add_option("--variant", variants, "variant to evaluate (repeatable; default all available)");
  eval->add_option("--dataset", dataset, "dataset name in the metrics file (default: manifest directory)");
  eval->add_option("--size", eval_size, "resize images to size x size first (0 keeps them)")
      ->check(CLI::NonNegativeNumber);
  eval->add_flag("--no-crf", no_crf, "skip the CRF variants");

  auto* seg = app.add_subcommand("segment", "three-level graph segmentation as 16-bit label maps");
  add_common(seg, common);
  seg->add_option("image", image, "P5/P6 image")->required()->check(CLI::ExistingFile);
  seg->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(count, size, split, common, out);
    if (*train) return run_train(manifest, weights, common, out);
    if (*train_contour) return run_train_contour(manifest, common, out);
    if (*inf) return run_infer(images, weights, contour, variant, no_crf, common, out);
    if (*crf) return run_crf(image, saliency, contour, plain, common, out);
    if (*eval) return run_eval(manifest, weights, contour, variants, no_crf, dataset, eval_size, common, out);
    if (*seg) return run_segment(image, common, out);
  } catch (const std::exception& e) {
    std::cerr << "dcl: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
