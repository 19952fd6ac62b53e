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


#include "dcl/dataset.hpp"

#include "dcl/image_io.hpp"
#include "dcl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace dcl {

namespace fs = std::filesystem;

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest " + path);
  const fs::path base = fs::path(path).parent_path();
  DatasetManifest m;
  m.split = fs::path(path).stem().string();
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() || line.find('\t', tab + 1) != std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'image<TAB>mask'");
    }
    ManifestEntry e{(base / line.substr(0, tab)).string(), (base / line.substr(tab + 1)).string()};
    for (const auto* p : {&e.image, &e.mask}) {
      if (!std::ifstream(*p)) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": cannot read " + *p);
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
  const fs::path base = fs::path(path).parent_path();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  for (const auto& e : manifest.entries) {
    out << fs::relative(e.image, base.empty() ? "." : base).generic_string() << '\t'
        << fs::relative(e.mask, base.empty() ? "." : base).generic_string() << '\n';
  }
}

std::vector<Sample> load_samples(const DatasetManifest& manifest, Index size) {
  std::vector<Sample> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    Sample s;
    s.name = fs::path(e.image).stem().string();
    s.image = read_image(e.image);
    s.mask = read_mask(e.mask);
    if (s.image.dim(2) != s.mask.dim(2) || s.image.dim(3) != s.mask.dim(3)) {
      throw std::runtime_error(e.image + ": image " + shape_str(s.image.dims()) + " and mask " +
                               shape_str(s.mask.dims()) + " differ in size");
    }
    if (s.image.dim(1) == 1) s.image = stack_channels({Var::constant(s.image), Var::constant(s.image),
                                                       Var::constant(s.image)}).value();
    if (size > 0 && (s.image.dim(2) != size || s.image.dim(3) != size)) {
      s.image = bilinear_resize(s.image, size, size);
      s.mask = bilinear_resize(s.mask, size, size);
      for (Index i = 0; i < s.mask.size(); ++i) s.mask[i] = s.mask[i] >= 0.5 ? 1.0 : 0.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  const double c = v * s, hp = h * 6.0, x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) r = c, g = x;
  else if (hp < 2) r = x, g = c;
  else if (hp < 3) g = c, b = x;
  else if (hp < 4) g = x, b = c;
  else if (hp < 5) r = x, b = c;
  else r = c, b = x;
  const double m = v - c;
  rgb[0] = r + m, rgb[1] = g + m, rgb[2] = b + m;
}

// Sum of a few random plane waves; smooth texture in roughly [-1, 1].
struct Waves {
  std::vector<std::array<double, 4>> w;  // fy, fx, phase, amplitude
  Waves(Rng& rng, int count, double max_freq) {
    for (int i = 0; i < count; ++i) {
      w.push_back({uniform(rng, -max_freq, max_freq), uniform(rng, -max_freq, max_freq),
                   uniform(rng, 0.0, 2.0 * std::numbers::pi), uniform(rng, 0.3, 1.0) / count});
    }
  }
  double operator()(double y, double x) const {
    double v = 0.0;
    for (const auto& a : w) v += a[3] * std::sin(a[0] * y + a[1] * x + a[2]);
    return v;
  }
};

Sample synthesize_one(Rng& rng, Index size) {
  Sample s;
  s.image = Tensor({1, 3, size, size});
  s.mask = make_map(size, size);
  const Index hw = size * size;

  // Background: low saturation, textured.
  double base[3];
  hsv_to_rgb(uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 0.2), uniform(rng, 0.35, 0.75), base);
  const Waves bg(rng, 4, 0.6);
  const double bg_amp = uniform(rng, 0.05, 0.15);
  std::normal_distribution<double> noise(0.0, 0.02);
  for (Index y = 0; y < size; ++y) {
    for (Index x = 0; x < size; ++x) {
      const double t = bg_amp * bg(double(y), double(x));
      for (Index c = 0; c < 3; ++c) s.image[c * hw + y * size + x] = base[c] + t;
    }
  }

  // 1-3 saturated shapes; retried until the mask covers 4%..55% of the image.
  const int shapes = std::uniform_int_distribution<int>(1, 3)(rng);
  std::vector<double> shape_img(size_t(3 * hw));
  for (int k = 0; k < shapes; ++k) {
    const int kind = std::uniform_int_distribution<int>(0, 2)(rng);
    const double cy = uniform(rng, 0.2, 0.8) * double(size), cx = uniform(rng, 0.2, 0.8) * double(size);
    const double ry = uniform(rng, 0.08, 0.25) * double(size), rx = uniform(rng, 0.08, 0.25) * double(size);
    const double angle = uniform(rng, 0.0, std::numbers::pi);
    double col[3];
    hsv_to_rgb(uniform(rng, 0.0, 1.0), uniform(rng, 0.65, 1.0), uniform(rng, 0.6, 1.0), col);
    const Waves tex(rng, 3, 0.8);
    const double tex_amp = uniform(rng, 0.0, 0.06);
    std::array<double, 3> lobes{uniform(rng, 0.1, 0.3), double(std::uniform_int_distribution<int>(2, 5)(rng)),
                                uniform(rng, 0.0, 2.0 * std::numbers::pi)};
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (Index y = 0; y < size; ++y) {
      for (Index x = 0; x < size; ++x) {
        const double dy = double(y) + 0.5 - cy, dx = double(x) + 0.5 - cx;
        const double u = (ca * dx + sa * dy) / rx, v = (-sa * dx + ca * dy) / ry;
        bool inside = false;
        if (kind == 0) {
          inside = u * u + v * v <= 1.0;
        } else if (kind == 1) {
          inside = std::fabs(u) <= 1.0 && std::fabs(v) <= 1.0;
        } else {
          const double r = 1.0 + lobes[0] * std::sin(lobes[1] * std::atan2(v, u) + lobes[2]);
          inside = std::sqrt(u * u + v * v) <= r;
        }
        if (!inside) continue;
        const Index p = y * size + x;
        s.mask[p] = 1.0;
        const double t = tex_amp * tex(double(y), double(x));
        for (Index c = 0; c < 3; ++c) s.image[c * hw + p] = col[c] + t;
      }
    }
  }
  for (Index i = 0; i < s.image.size(); ++i) s.image[i] = std::clamp(s.image[i] + noise(rng), 0.0, 1.0);
  return s;
}

}  // namespace

std::vector<Sample> synthesize_samples(Index n, std::uint64_t seed, Index size) {
  if (n < 0) throw std::invalid_argument("synthesize_samples: negative count");
  if (size < 8) throw std::invalid_argument("synthesize_samples: size must be at least 8");
  Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(size_t(n));
  for (Index i = 0; i < n; ++i) {
    for (int attempt = 0;; ++attempt) {
      Sample s = synthesize_one(rng, size);
      const double cover = s.mask.data().mean();
      if ((cover >= 0.04 && cover <= 0.55) || attempt >= 50) {
        if (cover <= 0.0) continue;
        char name[32];
        std::snprintf(name, sizeof(name), "img_%04ld", long(i));
        s.name = name;
        out.push_back(std::move(s));
        break;
      }
    }
  }
  return out;
}

DatasetManifest generate_synthetic_dataset(Index n, std::uint64_t seed, const std::string& out_dir, Index size,
                                           const std::string& split) {
  fs::create_directories(out_dir);
  DatasetManifest m;
  m.split = split;
  for (const Sample& s : synthesize_samples(n, seed, size)) {
    const std::string id = s.name.substr(4);
    const std::string img = (fs::path(out_dir) / ("img_" + id + ".ppm")).string();
    const std::string mask = (fs::path(out_dir) / ("mask_" + id + ".pgm")).string();
    write_ppm(img, s.image);
    write_saliency_pgm(mask, s.mask);
    m.entries.push_back({img, mask});
  }
  write_manifest((fs::path(out_dir) / "manifest.txt").string(), m);
  return m;
}

}  // namespace dcl
