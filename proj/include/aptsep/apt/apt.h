// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_APT_APT_H_
#define APTSEP_APT_APT_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "aptsep/corpus/corpus.h"
#include "aptsep/models/checkpoint.h"
#include "aptsep/models/models.h"
#include "aptsep/models/pretrain.h"

namespace aptsep::apt {

enum class Provenance { kInitial, kTuned, kJointTuned };

const char* ProvenanceName(Provenance p);
Provenance ParseProvenance(const std::string& name);

struct PromptBank {
  std::vector<int> class_ids;
  std::size_t dim = 0;
  std::vector<float> prompts;  // K x D, row k is the prompt of class_ids[k]
  Provenance provenance = Provenance::kInitial;
  std::string init = "sed-mean";  // or "random"
  int shots = 0;
  std::uint64_t seed = 0;
  std::string config_hash;

  std::size_t size() const { return class_ids.size(); }
  // Throws kMissingClass.
  std::size_t RowIndex(int class_id) const;
  bool Has(int class_id) const;
  std::span<const float> Row(int class_id) const;
  std::span<float> MutableRow(int class_id);
};

// Throws kInvalidArgument on duplicate ids or a K x D size mismatch, and
// kNonFinite on non-finite rows.
void ValidateBank(const PromptBank& bank);

std::size_t CountTrainable(std::size_t classes, std::size_t dim);
std::size_t CountTrainable(const PromptBank& bank);

// JSON header with a base64 payload of little-endian f32 values.
void SavePromptBank(const PromptBank& bank, const std::filesystem::path& path);
PromptBank LoadPromptBank(const std::filesystem::path& path);

// Row k is the arithmetic mean of the class's embeddings, accumulated in
// double in the order given. Throws kEmptyClass.
PromptBank InitFromEmbeddings(
    const std::map<int, std::vector<std::vector<float>>>& embeddings);

// Embeds every entry of the shots manifest with the frozen SED model.
PromptBank InitPrompts(models::SedModel& sed,
                       const corpus::CorpusManifest& shots_manifest,
                       const corpus::SourceSet& sources);

// Diagnostic: rows drawn N(0, scale^2) from the seeded generator.
PromptBank RandomPrompts(const std::vector<int>& class_ids, std::size_t dim,
                         std::uint64_t seed, double scale);

struct TuneConfig {
  double learning_rate = 3e-4;
  int batch_size = 4;
  int epochs = 100;
  // Steps per epoch; 0 means ceil(K * shots * 4 / batch).
  int steps_per_epoch = 0;
  std::uint64_t seed = 0;
  // Rows to tune; empty means every row of the bank.
  std::vector<int> classes;
  std::string config_hash;
};

struct TuneStats {
  std::vector<double> epoch_loss;
  std::size_t optimizer_state = 0;
  long steps = 0;
};

// Per-class step count of one epoch.
std::size_t StepsPerClass(const TuneConfig& config,
                          const corpus::CorpusManifest& train);

// Prompt-only tuning against the frozen separator. Each tuned class runs
// its own seeded mixture stream and its own Adam state over its row, so a
// row's trajectory does not depend on which other rows are tuned. Throws
// kMissingClass, kDivergence, kInvalidArgument (non-initial bank).
PromptBank TunePrompts(models::UssModel& uss, const PromptBank& bank,
                       const corpus::CorpusManifest& train,
                       const corpus::SourceSet& sources,
                       const TuneConfig& config, TuneStats* stats = nullptr,
                       const models::ProgressFn& progress = {});

struct JointResult {
  models::Checkpoint uss;
  PromptBank bank;
  TuneStats stats;
};

// Same schedule with the separator parameters also trainable; the input
// checkpoint is copied, never modified.
JointResult JointFinetune(const models::Checkpoint& uss,
                          const PromptBank& bank,
                          const corpus::CorpusManifest& train,
                          const corpus::SourceSet& sources,
                          const TuneConfig& config,
                          const models::ProgressFn& progress = {});

// Mean L1 loss of one example and its gradient w.r.t. the prompt, in
// double precision, with the separator weights taken from `uss`.
struct PromptLossProbe {
  PromptLossProbe(const models::Checkpoint& uss,
                  const corpus::MixtureExample& example);
  double Loss(std::span<const double> prompt);
  double LossAndGrad(std::span<const double> prompt,
                     std::vector<double>* grad);

 private:
  models::AudioConfig audio_;  // filled while config_ is parsed
  models::UssConfig config_;
  models::UssNet<double> net_;
  std::vector<grad::Tensor<double>> params_;
  grad::Tensor<double> features_, real_, imag_, target_;
};

}  // namespace aptsep::apt

#endif  // APTSEP_APT_APT_H_
