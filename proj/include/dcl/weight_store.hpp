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

#include "dcl/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dcl {

/// Named parameter tensors, ordered by name.
class WeightStore {
 public:
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Var& at(const std::string& name) const;
  Var& at(const std::string& name);

  size_t size() const { return entries_.size(); }
  Index parameter_count() const;
  /// Parameters whose name starts with `prefix`.
  std::vector<ParamRef> params(const std::string& prefix = "", double lr_mult = 1.0) const;
  void zero_grad();

  /// Copies all entries of `other` into this store; names must not clash.
  void merge(const WeightStore& other);
  /// Deep copy of the values with fresh autograd identities.
  WeightStore clone() const;

  const std::map<std::string, Var>& entries() const { return entries_; }

  friend bool operator==(const WeightStore& a, const WeightStore& b);

 private:
  std::map<std::string, Var> entries_;
};

class WeightFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kWeightsMagic[4] = {'D', 'C', 'L', 'W'};
inline constexpr std::uint32_t kWeightsVersion = 1;

/// Binary layout, little-endian: "DCLW", u32 version, u32 count, then per
/// tensor u16 name length, name bytes, u8 rank, u32 dims[rank], f64 payload.
void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

}  // namespace dcl
