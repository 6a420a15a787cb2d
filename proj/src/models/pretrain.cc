// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/models/pretrain.h"

#include <cmath>
#include <cstdio>

#include "aptsep/common/error.h"
#include "aptsep/common/rng.h"

namespace aptsep::models {
namespace {

void CheckFinite(double loss, const char* phase, int epoch, long step) {
  if (!std::isfinite(loss)) {
    throw Error(Errc::kDivergence,
                std::string(phase) + " loss is non-finite at epoch " +
                    std::to_string(epoch) + ", step " + std::to_string(step));
  }
}

void Report(const ProgressFn& progress, const char* phase, int epoch,
            int epochs, double loss) {
  if (!progress) return;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s epoch %d/%d loss %.5f", phase, epoch + 1,
                epochs, loss);
  progress(buf);
}

void RegisterAll(grad::Adam& adam, Checkpoint& ckpt) {
  for (NamedTensor& t : ckpt.tensors) adam.Register(&t.value);
}

void ClearGrads(Checkpoint& ckpt) {
  for (NamedTensor& t : ckpt.tensors) t.value.set_requires_grad(false);
}

}  // namespace

Checkpoint TrainSed(const corpus::CorpusManifest& train,
                    const corpus::SourceSet& sources,
                    const PretrainConfig& config,
                    std::vector<double>* epoch_loss,
                    const ProgressFn& progress) {
  if (train.classes.size() < 2) {
    throw Error(Errc::kTooFewClasses, "pretraining needs >= 2 seen classes");
  }
  SedConfig sc = config.sed;
  sc.class_ids = train.ClassIds();
  SedModel sed(InitSed(sc, config.audio, Rng(config.seed).Child("sed").key()));
  sed.SetParamsTrainable(true);
  grad::Adam adam(config.adam);
  RegisterAll(adam, sed.mutable_checkpoint());

  std::vector<grad::Tensor<float>> features;
  for (const corpus::ManifestEntry& e : train.entries) {
    features.push_back(SedFeatures(sources.Get(e), config.audio));
  }
  const std::size_t n = train.entries.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const float scale = 1.0f / static_cast<float>(bs);
  const Rng order = Rng(config.seed).Child("sed-order");
  long step = 0;
  for (int epoch = 0; epoch < config.sed_epochs; ++epoch) {
    Rng rng = order.Child(static_cast<std::uint64_t>(epoch));
    const std::vector<std::size_t> perm = rng.Permutation(n);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t e = perm[i];
        const float loss = sed.Loss(features[e], train.entries[e].class_id,
                                    true, scale);
        CheckFinite(loss, "SED", epoch, step);
        total += loss;
      }
      adam.Step();
      ++step;
    }
    if (epoch_loss) epoch_loss->push_back(total / static_cast<double>(n));
    Report(progress, "sed", epoch, config.sed_epochs,
           total / static_cast<double>(n));
  }
  Checkpoint ckpt = sed.checkpoint();
  ClearGrads(ckpt);
  ckpt.SetFrozen(true);
  ckpt.config_hash = config.config_hash;
  ckpt.seed = config.seed;
  ckpt.epoch = config.sed_epochs;
  return ckpt;
}

Checkpoint TrainUss(SedModel& sed, const corpus::CorpusManifest& train,
                    const corpus::SourceSet& sources,
                    const PretrainConfig& config,
                    std::vector<double>* epoch_loss,
                    const ProgressFn& progress) {
  if (train.classes.size() < 2) {
    throw Error(Errc::kTooFewClasses, "pretraining needs >= 2 seen classes");
  }
  UssConfig uc = config.uss;
  uc.embed_dim = sed.embed_dim();
  UssModel uss(InitUss(uc, config.audio, Rng(config.seed).Child("uss").key()));
  uss.SetParamsTrainable(true);
  uss.SetPromptTrainable(false);
  grad::Adam adam(config.adam);
  RegisterAll(adam, uss.mutable_checkpoint());

  std::vector<grad::Tensor<float>> prompts;
  for (const corpus::ManifestEntry& e : train.entries) {
    const std::vector<float> emb = sed.Embed(sources.Get(e));
    prompts.emplace_back(grad::Shape{1, emb.size()}, emb);
  }
  const std::size_t n = train.entries.size();
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps =
      config.uss_steps_per_epoch > 0
          ? static_cast<std::size_t>(config.uss_steps_per_epoch)
          : (n + bs - 1) / bs;
  const float scale = 1.0f / static_cast<float>(bs);
  const Rng order = Rng(config.seed).Child("uss-order");
  const Rng mixing = Rng(config.seed).Child("uss-mix");
  const std::size_t clip = config.audio.clip_length;
  long step = 0;
  std::uint64_t drawn = 0;
  std::vector<std::size_t> perm;
  std::size_t cursor = 0;
  std::uint64_t pass = 0;
  for (int epoch = 0; epoch < config.uss_epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      for (std::size_t b = 0; b < bs; ++b) {
        if (cursor == perm.size()) {
          Rng rng = order.Child(pass++);
          perm = rng.Permutation(n);
          cursor = 0;
        }
        const std::size_t e = perm[cursor++];
        const corpus::MixtureExample ex = corpus::DrawMixtureFor(
            train, sources, clip, e, mixing.Child(drawn++).key());
        const UssInput in = PrepareUssInput(ex.mixture, config.audio);
        const grad::Tensor<float> target({clip}, ex.target.samples);
        const float loss = uss.Forward(in, prompts[e], target);
        CheckFinite(loss, "USS", epoch, step);
        uss.Backward(scale, nullptr);
        total += loss;
      }
      adam.Step();
      ++step;
    }
    const double mean = total / static_cast<double>(steps * bs);
    if (epoch_loss) epoch_loss->push_back(mean);
    Report(progress, "uss", epoch, config.uss_epochs, mean);
  }
  Checkpoint ckpt = uss.checkpoint();
  ClearGrads(ckpt);
  ckpt.SetFrozen(true);
  ckpt.config_hash = config.config_hash;
  ckpt.seed = config.seed;
  ckpt.epoch = config.uss_epochs;
  return ckpt;
}

PretrainResult PretrainBackbone(const corpus::CorpusManifest& train,
                                const corpus::SourceSet& sources,
                                const PretrainConfig& config,
                                const ProgressFn& progress) {
  PretrainResult r;
  r.sed = TrainSed(train, sources, config, &r.sed_epoch_loss, progress);
  SedModel sed(r.sed);
  r.uss = TrainUss(sed, train, sources, config, &r.uss_epoch_loss, progress);
  return r;
}

double SedAccuracy(SedModel& sed, const corpus::CorpusManifest& manifest,
                   const corpus::SourceSet& sources) {
  if (manifest.entries.empty()) {
    throw Error(Errc::kEmptyList, "no entries to classify");
  }
  std::size_t correct = 0;
  for (const corpus::ManifestEntry& e : manifest.entries) {
    if (sed.Classify(SedFeatures(sources.Get(e), sed.audio())) == e.class_id) {
      ++correct;
    }
  }
  return static_cast<double>(correct) /
         static_cast<double>(manifest.entries.size());
}

}  // namespace aptsep::models
