// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_MODELS_CHECKPOINT_H_
#define APTSEP_MODELS_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aptsep/grad/tensor.h"

namespace aptsep::models {

struct NamedTensor {
  std::string name;
  grad::Tensor<float> value;
  bool frozen = false;
};

// File layout: "APTCKPT1", u64 LE header length, JSON header, then the
// tensors as little-endian f32 in header order.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  int version = kFormatVersion;
  std::string model;         // "sed" or "uss"
  std::string model_config;  // architecture JSON
  std::string config_hash;
  std::uint64_t seed = 0;
  int epoch = 0;
  std::vector<NamedTensor> tensors;

  bool Has(const std::string& name) const;
  const grad::Tensor<float>& Get(const std::string& name) const;
  grad::Tensor<float>& Mutable(const std::string& name);
  void SetFrozen(bool frozen);
  std::size_t ParameterCount() const;
};

bool operator==(const Checkpoint& a, const Checkpoint& b);

void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws kCorruptFile or kVersionMismatch; never returns a partial model.
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace aptsep::models

#endif  // APTSEP_MODELS_CHECKPOINT_H_
