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

#include "dcl/weight_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace dcl {

static_assert(std::endian::native == std::endian::little, "weights I/O assumes a little-endian host");

void WeightStore::add(const std::string& name, Tensor value) {
  if (name.empty()) throw std::invalid_argument("WeightStore: empty tensor name");
  if (!entries_.emplace(name, Var::parameter(std::move(value))).second) {
    throw std::invalid_argument("WeightStore: duplicate tensor name '" + name + "'");
  }
}

const Var& WeightStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("WeightStore: no tensor named '" + name + "'");
  return it->second;
}

Var& WeightStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("WeightStore: no tensor named '" + name + "'");
  return it->second;
}

Index WeightStore::parameter_count() const {
  Index total = 0;
  for (const auto& [_, v] : entries_) total += v.size();
  return total;
}

std::vector<ParamRef> WeightStore::params(const std::string& prefix, double lr_mult) const {
  std::vector<ParamRef> out;
  for (const auto& [name, v] : entries_) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.push_back({name, v, lr_mult});
  }
  return out;
}

void WeightStore::zero_grad() {
  for (auto& [_, v] : entries_) v.zero_grad();
}

void WeightStore::merge(const WeightStore& other) {
  for (const auto& [name, v] : other.entries_) add(name, v.value());
}

WeightStore WeightStore::clone() const {
  WeightStore copy;
  copy.merge(*this);
  return copy;
}

bool operator==(const WeightStore& a, const WeightStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  auto ib = b.entries_.begin();
  for (const auto& [name, v] : a.entries_) {
    if (name != ib->first || !(v.value() == ib->second.value())) return false;
    ++ib;
  }
  return true;
}

namespace {

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& what) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw WeightFormatError("weights file truncated while reading " + what);
  }
  return value;
}

}  // namespace

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kWeightsMagic, 4);
  put<std::uint32_t>(os, kWeightsVersion);
  put<std::uint32_t>(os, std::uint32_t(store.size()));
  for (const auto& [name, v] : store.entries()) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw std::invalid_argument("tensor name too long: " + name);
    }
    put<std::uint16_t>(os, std::uint16_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    const Tensor& t = v.value();
    put<std::uint8_t>(os, std::uint8_t(t.rank()));
    for (Index d : t.dims()) put<std::uint32_t>(os, std::uint32_t(d));
    os.write(reinterpret_cast<const char*>(t.ptr()), std::streamsize(t.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

namespace {

WeightStore read_store(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4)) throw WeightFormatError("weights file truncated while reading magic");
  if (std::memcmp(magic, kWeightsMagic, 4) != 0) {
    throw WeightFormatError("not a weights file (bad magic)");
  }
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kWeightsVersion) {
    throw WeightFormatError("unsupported weights format version " + std::to_string(version) +
                            " (expected " + std::to_string(kWeightsVersion) + ")");
  }
  const auto count = get<std::uint32_t>(is, "tensor count");
  WeightStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint16_t>(is, "name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw WeightFormatError("weights file truncated while reading a name");
    const auto rank = get<std::uint8_t>(is, "rank of " + name);
    Shape dims;
    for (std::uint8_t r = 0; r < rank; ++r) {
      const auto d = get<std::uint32_t>(is, "dims of " + name);
      if (d == 0) throw WeightFormatError("zero dimension in tensor " + name);
      dims.push_back(Index(d));
    }
    Tensor t(dims);
    if (!is.read(reinterpret_cast<char*>(t.ptr()), std::streamsize(t.size() * sizeof(double)))) {
      throw WeightFormatError("weights file truncated inside payload of " + name);
    }
    store.add(name, std::move(t));
  }
  return store;
}

}  // namespace

WeightStore load_weights(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open weights file " + path.string());
  try {
    return read_store(is);
  } catch (const WeightFormatError& e) {
    throw WeightFormatError(path.string() + ": " + e.what());
  }
}

}  // namespace dcl
