// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_MODELS_PRETRAIN_H_
#define APTSEP_MODELS_PRETRAIN_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aptsep/corpus/corpus.h"
#include "aptsep/grad/adam.h"
#include "aptsep/models/checkpoint.h"
#include "aptsep/models/models.h"

namespace aptsep::models {

using ProgressFn = std::function<void(const std::string&)>;

struct PretrainConfig {
  AudioConfig audio;
  SedConfig sed;  // class_ids are taken from the corpus
  UssConfig uss;
  int sed_epochs = 40;
  int uss_epochs = 60;
  // Steps per separator epoch; 0 means one pass over the train targets.
  int uss_steps_per_epoch = 0;
  int batch_size = 4;
  grad::AdamOptions adam;
  std::uint64_t seed = 0;
  std::string config_hash;
};

struct PretrainResult {
  Checkpoint sed;
  Checkpoint uss;
  std::vector<double> sed_epoch_loss;
  std::vector<double> uss_epoch_loss;
};

// Phase A: SED classifier with softmax cross-entropy on seen classes.
// Phase B: SED frozen; separator trained with waveform L1 on seen-class
// mixtures, conditioned on the clean target's own embedding. Both returned
// checkpoints are flagged frozen. Throws kDivergence on a non-finite loss.
PretrainResult PretrainBackbone(const corpus::CorpusManifest& seen_train,
                                const corpus::SourceSet& sources,
                                const PretrainConfig& config,
                                const ProgressFn& progress = {});

Checkpoint TrainSed(const corpus::CorpusManifest& seen_train,
                    const corpus::SourceSet& sources,
                    const PretrainConfig& config,
                    std::vector<double>* epoch_loss,
                    const ProgressFn& progress = {});

Checkpoint TrainUss(SedModel& sed, const corpus::CorpusManifest& seen_train,
                    const corpus::SourceSet& sources,
                    const PretrainConfig& config,
                    std::vector<double>* epoch_loss,
                    const ProgressFn& progress = {});

// Fraction of entries whose predicted class equals the label.
double SedAccuracy(SedModel& sed, const corpus::CorpusManifest& manifest,
                   const corpus::SourceSet& sources);

}  // namespace aptsep::models

#endif  // APTSEP_MODELS_PRETRAIN_H_
