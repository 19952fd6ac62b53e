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
#include <stdexcept>
#include <string>
#include <vector>

namespace dcl {

class ImageFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw netpbm raster, samples row-major and interleaved.
struct Raster {
  Index width = 0, height = 0, channels = 1;
  int maxval = 255;
  std::vector<std::uint16_t> samples;
};

/// Binary P5 (grey) or P6 (colour), maxval up to 65535.
Raster read_netpbm(const std::string& path);
void write_netpbm(const std::string& path, const Raster& raster);

/// [1,C,H,W] with values in [0,1].
Tensor raster_to_tensor(const Raster& raster);
Tensor read_image(const std::string& path);
/// [1,1,H,W] binary mask: 1 where the (channel-mean) sample is >= 128 of 255.
Tensor read_mask(const std::string& path);

/// 8-bit PGM, values round(255 * clamp(v, 0, 1)). `map` is [1,1,H,W].
void write_saliency_pgm(const std::string& path, const Tensor& map);
/// 8-bit PPM of a [1,3,H,W] image in [0,1].
void write_ppm(const std::string& path, const Tensor& image);
/// 16-bit PGM of a label map (labels must fit in 0..65535).
void write_label_pgm(const std::string& path, Index height, Index width, const std::vector<Index>& labels);

}  // namespace dcl
