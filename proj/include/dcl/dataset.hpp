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

#include "dcl/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dcl {

struct ManifestEntry {
  std::string image;  // resolved path
  std::string mask;
};

struct DatasetManifest {
  std::string split;  // free-form tag, e.g. "train" or "test"
  std::vector<ManifestEntry> entries;
};

/// One `image<TAB>mask` pair per line, paths relative to the manifest's
/// directory. Blank lines are skipped; anything else malformed is an error
/// naming the line. Paths are checked for readability.
DatasetManifest read_manifest(const std::string& path);
/// Writes entries relative to the manifest's directory.
void write_manifest(const std::string& path, const DatasetManifest& manifest);

struct Sample {
  std::string name;  // image file stem
  Tensor image;      // [1,3,H,W] in [0,1]; grey images are replicated
  Tensor mask;       // [1,1,H,W] binary
};

/// Loads every entry; when `size` > 0 images and masks are resized to
/// size x size (masks re-binarised at 0.5). Errors name the entry.
std::vector<Sample> load_samples(const DatasetManifest& manifest, Index size = 0);

/// n images of 1-3 saturated shapes (ellipses, rectangles, blobs) on
/// low-saturation textured backgrounds, with exact masks. Writes
/// img_NNNN.ppm, mask_NNNN.pgm and manifest.txt into out_dir and returns the
/// manifest. Deterministic in (n, seed, size).
DatasetManifest generate_synthetic_dataset(Index n, std::uint64_t seed, const std::string& out_dir,
                                           Index size = 64, const std::string& split = "train");

/// In-memory variant of the generator: the same samples without touching disk.
std::vector<Sample> synthesize_samples(Index n, std::uint64_t seed, Index size = 64);

}  // namespace dcl
