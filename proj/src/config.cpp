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


#include "dcl/config.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace dcl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

double to_double(const std::string& v) {
  size_t used = 0;
  const double d = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return d;
}

long long to_int(const std::string& v) {
  size_t used = 0;
  const long long i = std::stoll(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return i;
}

bool to_bool(const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw std::invalid_argument("expected on/off");
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

struct Field {
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Field real(T PipelineConfig::*outer, double T::*inner) {
  return {[=](PipelineConfig& c, const std::string& v) { c.*outer.*inner = to_double(v); },
          [=](const PipelineConfig& c) { return fmt(c.*outer.*inner); }};
}

template <typename T, typename I>
Field integer(T PipelineConfig::*outer, I T::*inner) {
  return {[=](PipelineConfig& c, const std::string& v) { c.*outer.*inner = I(to_int(v)); },
          [=](const PipelineConfig& c) { return std::to_string(c.*outer.*inner); }};
}

template <typename I>
Field top_integer(I PipelineConfig::*field) {
  return {[=](PipelineConfig& c, const std::string& v) { c.*field = I(to_int(v)); },
          [=](const PipelineConfig& c) { return std::to_string(c.*field); }};
}

Field seg_field(size_t level, int which) {
  return {[=](PipelineConfig& c, const std::string& v) {
            auto& p = c.seg[level];
            if (which == 0) p.k = to_double(v);
            if (which == 1) p.min_size = Index(to_int(v));
            if (which == 2) p.sigma = to_double(v);
          },
          [=](const PipelineConfig& c) {
            const auto& p = c.seg[level];
            return which == 0 ? fmt(p.k) : which == 1 ? std::to_string(p.min_size) : fmt(p.sigma);
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["seed"] = {[](PipelineConfig& c, const std::string& v) {
                   const long long s = to_int(v);
                   if (s < 0) throw std::invalid_argument("negative");
                   c.seed = std::uint64_t(s);
                 },
                 [](const PipelineConfig& c) { return std::to_string(c.seed); }};
    t["image_size"] = top_integer(&PipelineConfig::image_size);
    t["net.branch_channels"] = integer(&PipelineConfig::net, &NetworkSpec::branch_channels);
    t["net.head_channels"] = integer(&PipelineConfig::net, &NetworkSpec::head_channels);
    t["attn.hidden"] = top_integer(&PipelineConfig::attn_hidden);
    t["mlp.hidden"] = top_integer(&PipelineConfig::mlp_hidden);
    for (size_t l = 0; l < 3; ++l) {
      const std::string p = "seg.level" + std::to_string(l + 1) + ".";
      t[p + "k"] = seg_field(l, 0);
      t[p + "min_size"] = seg_field(l, 1);
      t[p + "sigma"] = seg_field(l, 2);
    }
    t["seg.single_level"] = {[](PipelineConfig& c, const std::string& v) { c.seg_level = Index(to_int(v)) - 1; },
                             [](const PipelineConfig& c) { return std::to_string(c.seg_level + 1); }};
    t["fusion.mode"] = {[](PipelineConfig& c, const std::string& v) { c.fusion = parse_fusion_mode(v); },
                        [](const PipelineConfig& c) { return fusion_mode_name(c.fusion); }};
    t["fusion.resolution"] = {
        [](PipelineConfig& c, const std::string& v) { c.fusion_resolution = parse_fusion_resolution(v); },
        [](const PipelineConfig& c) { return fusion_resolution_name(c.fusion_resolution); }};
    t["infer.multiscale"] = {[](PipelineConfig& c, const std::string& v) { c.multiscale = to_bool(v); },
                             [](const PipelineConfig& c) { return std::string(c.multiscale ? "on" : "off"); }};
    t["crf.w1"] = real(&PipelineConfig::crf, &CrfConfig::w1);
    t["crf.w2"] = real(&PipelineConfig::crf, &CrfConfig::w2);
    t["crf.sigma_alpha"] = real(&PipelineConfig::crf, &CrfConfig::sigma_alpha);
    t["crf.sigma_beta"] = real(&PipelineConfig::crf, &CrfConfig::sigma_beta);
    t["crf.sigma_gamma"] = real(&PipelineConfig::crf, &CrfConfig::sigma_gamma);
    t["crf.sigma_epsilon"] = real(&PipelineConfig::crf, &CrfConfig::sigma_epsilon);
    t["crf.rho"] = real(&PipelineConfig::crf, &CrfConfig::rho);
    t["crf.iterations"] = integer(&PipelineConfig::crf, &CrfConfig::iterations);
    t["crf.neighborhood"] = integer(&PipelineConfig::crf, &CrfConfig::neighborhood);
    t["crf.eig_count"] = integer(&PipelineConfig::crf, &CrfConfig::eig_count);
    t["crf.eig_tol"] = real(&PipelineConfig::crf, &CrfConfig::eig_tol);
    t["train.alternations"] = integer(&PipelineConfig::train, &TrainConfig::alternations);
    t["train.warmup_epochs"] = integer(&PipelineConfig::train, &TrainConfig::warmup_epochs);
    t["train.mlp_init_epochs"] = integer(&PipelineConfig::train, &TrainConfig::mlp_init_epochs);
    t["train.mlp_epochs"] = integer(&PipelineConfig::train, &TrainConfig::mlp_epochs);
    t["train.fcn_epochs"] = integer(&PipelineConfig::train, &TrainConfig::fcn_epochs);
    t["train.batch_images"] = integer(&PipelineConfig::train, &TrainConfig::batch_images);
    t["train.flip"] = {[](PipelineConfig& c, const std::string& v) { c.train.flip = to_bool(v); },
                       [](const PipelineConfig& c) { return std::string(c.train.flip ? "on" : "off"); }};
    t["train.lr_new"] = real(&PipelineConfig::train, &TrainConfig::lr_new);
    t["train.lr_backbone"] = real(&PipelineConfig::train, &TrainConfig::lr_backbone);
    t["train.lr_mlp"] = real(&PipelineConfig::train, &TrainConfig::lr_mlp);
    t["train.momentum"] = real(&PipelineConfig::train, &TrainConfig::momentum);
    t["train.weight_decay"] = real(&PipelineConfig::train, &TrainConfig::weight_decay);
    t["train.power"] = real(&PipelineConfig::train, &TrainConfig::power);
    t["contour.epochs"] = integer(&PipelineConfig::contour, &ContourTrainConfig::epochs);
    t["contour.lr_new"] = real(&PipelineConfig::contour, &ContourTrainConfig::lr_new);
    t["contour.lr_backbone"] = real(&PipelineConfig::contour, &ContourTrainConfig::lr_backbone);
    return t;
  }();
  return table;
}

}  // namespace

void PipelineConfig::validate() const {
  std::vector<std::string> bad;
  try {
    net.validate();
  } catch (const std::invalid_argument& e) {
    bad.emplace_back(e.what());
  }
  try {
    crf.validate();
  } catch (const std::invalid_argument& e) {
    bad.emplace_back(e.what());
  }
  if (image_size < net.total_stride() || image_size % net.total_stride() != 0) {
    bad.emplace_back("image_size must be a positive multiple of the network stride");
  }
  if (attn_hidden < 1) bad.emplace_back("attn.hidden must be positive");
  if (mlp_hidden < 1) bad.emplace_back("mlp.hidden must be positive");
  for (size_t l = 0; l < seg.size(); ++l) {
    if (seg[l].k < 0 || seg[l].min_size < 1 || seg[l].sigma < 0) {
      bad.emplace_back("seg.level" + std::to_string(l + 1) + " parameters out of range");
    }
  }
  if (seg_level < 0 || seg_level >= Index(seg.size())) bad.emplace_back("seg.single_level must be 1, 2 or 3");
  if (train.alternations < 0 || train.warmup_epochs < 0 || train.mlp_init_epochs < 0 || train.mlp_epochs < 0 ||
      train.fcn_epochs < 0) {
    bad.emplace_back("train epoch counts must be non-negative");
  }
  if (train.batch_images < 1) bad.emplace_back("train.batch_images must be positive");
  if (!(train.lr_new > 0) || !(train.lr_backbone >= 0) || !(train.lr_mlp > 0)) {
    bad.emplace_back("train learning rates must be positive");
  }
  if (train.momentum < 0 || train.momentum >= 1) bad.emplace_back("train.momentum must be in [0,1)");
  if (train.weight_decay < 0) bad.emplace_back("train.weight_decay must be non-negative");
  if (contour.epochs < 0 || !(contour.lr_new > 0) || !(contour.lr_backbone >= 0)) {
    bad.emplace_back("contour training parameters out of range");
  }
  if (bad.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& b : bad) msg += "\n  " + b;
  throw ConfigError(msg);
}

PipelineConfig parse_config(const std::string& text, const std::string& origin) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq)), value = trim(body.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    try {
      it->second.set(cfg, value);
    } catch (const std::exception& e) {
      throw ConfigError(where + ": bad value '" + value + "' for '" + key + "' (" + e.what() + ")");
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string config_to_text(const PipelineConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& kv : fields()) keys.push_back(kv.first);
  return keys;
}

}  // namespace dcl
