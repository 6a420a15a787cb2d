// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_CLI_CONFIG_H_
#define APTSEP_CLI_CONFIG_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aptsep/apt/apt.h"
#include "aptsep/corpus/corpus.h"
#include "aptsep/models/models.h"
#include "aptsep/models/pretrain.h"
#include "json.hpp"

namespace aptsep::cli {

// Shot setting; kFullShots selects the whole train split.
inline constexpr int kFullShots = 0;

std::string ShotsName(int shots);
// "full" or a positive integer. Throws kInvalidArgument.
int ParseShots(const std::string& text);

struct ExperimentConfig {
  std::uint64_t master_seed = 20260101;
  int sample_rate = 8000;
  double clip_seconds = 1.0;
  int samples_per_class = 24;
  double train_fraction = 0.6;
  std::size_t embed_dim = 64;
  std::size_t n_fft = 256;
  std::size_t hop = 64;
  std::size_t n_mels = 32;
  std::array<std::size_t, 3> sed_channels{16, 32, 64};
  std::array<std::size_t, 3> uss_channels{8, 16, 32};
  int sed_epochs = 40;
  int uss_epochs = 60;
  int uss_steps_per_epoch = 0;
  int pretrain_batch_size = 4;
  double pretrain_learning_rate = 3e-4;
  double tune_learning_rate = 3e-4;
  int tune_batch_size = 4;
  int tune_epochs = 100;
  int tune_steps_per_epoch = 0;
  corpus::Split target_split = corpus::Split::kUnseen;
  std::vector<int> fewshot{1, 5, 10, kFullShots};  // strictly increasing
  std::string out_dir = "runs/desk";

  corpus::CorpusConfig Corpus() const;
  models::AudioConfig Audio() const;
  // Run seed of a seed offset.
  std::uint64_t RunSeed(int offset) const;
  models::PretrainConfig Pretrain(int offset) const;
  apt::TuneConfig Tune(int offset) const;
};

nlohmann::json ToJson(const ExperimentConfig& config);
// Unknown keys and invariant violations throw kInvalidArgument.
ExperimentConfig FromJson(const nlohmann::json& j);
ExperimentConfig LoadConfig(const std::filesystem::path& path);

// Sets the field at a dotted path ("tune.epochs=20"). The value is parsed
// as JSON, falling back to a plain string.
void ApplyOverride(nlohmann::json& j, const std::string& assignment);

// SHA-256 over the canonical JSON of the fields that shape the corpus and
// the backbone: master seed, corpus, model and pretrain sections.
std::string ConfigHash(const ExperimentConfig& config);

}  // namespace aptsep::cli

#endif  // APTSEP_CLI_CONFIG_H_
