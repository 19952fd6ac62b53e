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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace dcl {

namespace {

// Reads the next header integer, skipping whitespace and '#' comments.
Index header_int(const std::string& path, const std::vector<char>& buf, size_t& pos) {
  for (;;) {
    while (pos < buf.size() && std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
    if (pos < buf.size() && buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= buf.size() || !std::isdigit(static_cast<unsigned char>(buf[pos]))) {
    throw ImageFormatError(path + ": malformed netpbm header");
  }
  Index v = 0;
  while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
    v = v * 10 + (buf[pos++] - '0');
    if (v > (Index(1) << 30)) throw ImageFormatError(path + ": header value out of range");
  }
  return v;
}

}  // namespace

Raster read_netpbm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageFormatError("cannot open " + path);
  const std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 2 || buf[0] != 'P' || (buf[1] != '5' && buf[1] != '6')) {
    throw ImageFormatError(path + ": not a binary PGM (P5) or PPM (P6) file");
  }
  Raster r;
  r.channels = buf[1] == '6' ? 3 : 1;
  size_t pos = 2;
  r.width = header_int(path, buf, pos);
  r.height = header_int(path, buf, pos);
  r.maxval = int(header_int(path, buf, pos));
  if (r.width < 1 || r.height < 1) throw ImageFormatError(path + ": empty image");
  if (r.maxval < 1 || r.maxval > 65535) throw ImageFormatError(path + ": maxval must be in 1..65535");
  if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos]))) {
    throw ImageFormatError(path + ": missing whitespace after header");
  }
  ++pos;
  const size_t bytes = r.maxval > 255 ? 2 : 1;
  const size_t count = size_t(r.width * r.height * r.channels);
  if (buf.size() - pos < count * bytes) throw ImageFormatError(path + ": truncated pixel data");
  r.samples.resize(count);
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
  for (size_t i = 0; i < count; ++i) {
    r.samples[i] = bytes == 2 ? std::uint16_t((p[2 * i] << 8) | p[2 * i + 1]) : p[i];
    if (r.samples[i] > r.maxval) throw ImageFormatError(path + ": sample exceeds maxval");
  }
  return r;
}

void write_netpbm(const std::string& path, const Raster& r) {
  if (r.channels != 1 && r.channels != 3) throw ImageFormatError(path + ": netpbm needs 1 or 3 channels");
  if (r.samples.size() != size_t(r.width * r.height * r.channels)) {
    throw ImageFormatError(path + ": sample count does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageFormatError("cannot write " + path);
  out << (r.channels == 3 ? "P6" : "P5") << '\n' << r.width << ' ' << r.height << '\n' << r.maxval << '\n';
  std::vector<unsigned char> data;
  data.reserve(r.samples.size() * 2);
  for (std::uint16_t s : r.samples) {
    if (r.maxval > 255) data.push_back(static_cast<unsigned char>(s >> 8));
    data.push_back(static_cast<unsigned char>(s & 0xff));
  }
  out.write(reinterpret_cast<const char*>(data.data()), std::streamsize(data.size()));
  if (!out) throw ImageFormatError("write failed: " + path);
}

Tensor raster_to_tensor(const Raster& r) {
  Tensor t({1, r.channels, r.height, r.width});
  const Index hw = r.height * r.width;
  for (Index p = 0; p < hw; ++p) {
    for (Index c = 0; c < r.channels; ++c) {
      t[c * hw + p] = double(r.samples[size_t(p * r.channels + c)]) / double(r.maxval);
    }
  }
  return t;
}

Tensor read_image(const std::string& path) { return raster_to_tensor(read_netpbm(path)); }

Tensor read_mask(const std::string& path) {
  const Raster r = read_netpbm(path);
  Tensor m = make_map(r.height, r.width);
  for (Index p = 0; p < r.height * r.width; ++p) {
    double total = 0.0;
    for (Index c = 0; c < r.channels; ++c) total += r.samples[size_t(p * r.channels + c)];
    m[p] = total / double(r.channels) * 255.0 / double(r.maxval) >= 128.0 ? 1.0 : 0.0;
  }
  return m;
}

namespace {

std::uint16_t to_byte(double v) {
  return std::uint16_t(std::clamp(std::lround(255.0 * std::clamp(v, 0.0, 1.0)), 0L, 255L));
}

}  // namespace

void write_saliency_pgm(const std::string& path, const Tensor& map) {
  if (map.rank() != 4 || map.dim(0) != 1 || map.dim(1) != 1) {
    throw std::invalid_argument("write_saliency_pgm: expected [1,1,H,W], got " + shape_str(map.dims()));
  }
  Raster r{map.dim(3), map.dim(2), 1, 255, {}};
  r.samples.resize(size_t(map.size()));
  for (Index i = 0; i < map.size(); ++i) r.samples[size_t(i)] = to_byte(map[i]);
  write_netpbm(path, r);
}

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3) {
    throw std::invalid_argument("write_ppm: expected [1,3,H,W], got " + shape_str(image.dims()));
  }
  const Index h = image.dim(2), w = image.dim(3), hw = h * w;
  Raster r{w, h, 3, 255, {}};
  r.samples.resize(size_t(3 * hw));
  for (Index p = 0; p < hw; ++p) {
    for (Index c = 0; c < 3; ++c) r.samples[size_t(3 * p + c)] = to_byte(image[c * hw + p]);
  }
  write_netpbm(path, r);
}

void write_label_pgm(const std::string& path, Index height, Index width, const std::vector<Index>& labels) {
  if (Index(labels.size()) != height * width) throw std::invalid_argument("write_label_pgm: size mismatch");
  Raster r{width, height, 1, 65535, {}};
  r.samples.resize(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 65535) throw std::invalid_argument("write_label_pgm: label exceeds 16 bits");
    r.samples[i] = std::uint16_t(labels[i]);
  }
  write_netpbm(path, r);
}

}  // namespace dcl
