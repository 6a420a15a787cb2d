// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/apt/apt.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <set>

#include "aptsep/common/error.h"
#include "aptsep/common/hash.h"
#include "aptsep/common/rng.h"
#include "aptsep/grad/adam.h"
#include "json.hpp"

namespace aptsep::apt {
namespace {

using Json = nlohmann::json;

constexpr const char* kBankFormat = "aptsep-prompt-bank";
constexpr int kBankVersion = 1;

std::vector<int> TunedClasses(const PromptBank& bank, const TuneConfig& cfg,
                              const corpus::CorpusManifest& train) {
  std::vector<int> classes = cfg.classes.empty() ? bank.class_ids : cfg.classes;
  std::set<int> seen;
  for (int k : classes) {
    if (!seen.insert(k).second) {
      throw Error(Errc::kDuplicateClass,
                  "class " + std::to_string(k) + " listed twice");
    }
    if (!bank.Has(k)) {
      throw Error(Errc::kMissingClass,
                  "class " + std::to_string(k) + " is not in the prompt bank");
    }
    if (train.EntriesOf(k).empty()) {
      throw Error(Errc::kMissingClass, "class " + std::to_string(k) +
                                           " has no training samples");
    }
  }
  return classes;
}

void CheckTuneConfig(const TuneConfig& cfg) {
  if (!(cfg.learning_rate > 0.0) || cfg.batch_size < 1 || cfg.epochs < 0 ||
      cfg.steps_per_epoch < 0) {
    throw Error(Errc::kInvalidArgument, "invalid tuning configuration");
  }
}

// The shared loop of prompt-only and joint tuning. `step` is called after
// each class batch with the class id.
template <typename StepFn>
void RunSchedule(models::UssModel& uss, const corpus::CorpusManifest& train,
                 const corpus::SourceSet& sources, const TuneConfig& cfg,
                 const std::vector<int>& classes,
                 std::map<int, grad::Tensor<float>>& rows, TuneStats* stats,
                 const models::ProgressFn& progress, StepFn&& step) {
  const std::size_t per_class = StepsPerClass(cfg, train);
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const float scale = 1.0f / static_cast<float>(bs);
  const std::size_t clip = uss.audio().clip_length;
  const Rng root = Rng(cfg.seed).Child("tune");
  std::map<int, std::uint64_t> drawn;
  std::vector<float> pg;
  long steps = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < per_class; ++s) {
      for (int k : classes) {
        grad::Tensor<float>& row = rows.at(k);
        const Rng stream = root.Child(static_cast<std::uint64_t>(k));
        pg.assign(row.size(), 0.0f);
        for (std::size_t b = 0; b < bs; ++b) {
          const corpus::MixtureExample ex = corpus::DrawMixture(
              train, sources, clip, k, stream.Child(drawn[k]++).key());
          const models::UssInput in =
              models::PrepareUssInput(ex.mixture, uss.audio());
          const grad::Tensor<float> target({clip}, ex.target.samples);
          const float loss = uss.Forward(in, row, target);
          if (!std::isfinite(loss)) {
            throw Error(Errc::kDivergence,
                        "non-finite tuning loss at epoch " +
                            std::to_string(epoch) + ", step " +
                            std::to_string(steps) + ", class " +
                            std::to_string(k));
          }
          uss.Backward(scale, &pg);
          total += loss;
          ++count;
        }
        row.AccumulateGrad(pg);
        step(k);
        ++steps;
      }
    }
    const double mean = count ? total / static_cast<double>(count) : 0.0;
    if (stats) stats->epoch_loss.push_back(mean);
    if (progress) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "tune epoch %d/%d loss %.5f", epoch + 1,
                    cfg.epochs, mean);
      progress(buf);
    }
  }
  if (stats) stats->steps = steps;
}

std::map<int, grad::Tensor<float>> MakeRows(const PromptBank& bank,
                                            const std::vector<int>& classes) {
  std::map<int, grad::Tensor<float>> rows;
  for (int k : classes) {
    std::span<const float> r = bank.Row(k);
    grad::Tensor<float> t({1, bank.dim}, std::vector<float>(r.begin(), r.end()));
    t.set_requires_grad(true);
    rows.emplace(k, std::move(t));
  }
  return rows;
}

void WriteRows(const std::map<int, grad::Tensor<float>>& rows,
               PromptBank& bank) {
  for (const auto& [k, t] : rows) {
    std::span<float> dst = bank.MutableRow(k);
    std::copy(t.data().begin(), t.data().end(), dst.begin());
  }
}

}  // namespace

const char* ProvenanceName(Provenance p) {
  switch (p) {
    case Provenance::kInitial: return "initial";
    case Provenance::kTuned: return "tuned";
    case Provenance::kJointTuned: return "joint-tuned";
  }
  return "unknown";
}

Provenance ParseProvenance(const std::string& name) {
  for (Provenance p :
       {Provenance::kInitial, Provenance::kTuned, Provenance::kJointTuned}) {
    if (name == ProvenanceName(p)) return p;
  }
  throw Error(Errc::kCorruptFile, "unknown provenance '" + name + "'");
}

std::size_t PromptBank::RowIndex(int class_id) const {
  for (std::size_t i = 0; i < class_ids.size(); ++i) {
    if (class_ids[i] == class_id) return i;
  }
  throw Error(Errc::kMissingClass,
              "class " + std::to_string(class_id) + " is not in the bank");
}

bool PromptBank::Has(int class_id) const {
  return std::find(class_ids.begin(), class_ids.end(), class_id) !=
         class_ids.end();
}

std::span<const float> PromptBank::Row(int class_id) const {
  return std::span<const float>(prompts).subspan(RowIndex(class_id) * dim,
                                                 dim);
}

std::span<float> PromptBank::MutableRow(int class_id) {
  return std::span<float>(prompts).subspan(RowIndex(class_id) * dim, dim);
}

void ValidateBank(const PromptBank& bank) {
  std::set<int> ids(bank.class_ids.begin(), bank.class_ids.end());
  if (ids.size() != bank.class_ids.size()) {
    throw Error(Errc::kInvalidArgument, "prompt bank has duplicate class ids");
  }
  if (bank.dim == 0 || bank.prompts.size() != bank.class_ids.size() * bank.dim) {
    throw Error(Errc::kInvalidArgument, "prompt bank is not K x D");
  }
  for (float v : bank.prompts) {
    if (!std::isfinite(v)) {
      throw Error(Errc::kNonFinite, "prompt bank has non-finite values");
    }
  }
}

std::size_t CountTrainable(std::size_t classes, std::size_t dim) {
  return classes * dim;
}

std::size_t CountTrainable(const PromptBank& bank) {
  return CountTrainable(bank.class_ids.size(), bank.dim);
}

void SavePromptBank(const PromptBank& bank, const std::filesystem::path& path) {
  ValidateBank(bank);
  std::vector<std::uint8_t> bytes(bank.prompts.size() * sizeof(float));
  std::memcpy(bytes.data(), bank.prompts.data(), bytes.size());
  Json j;
  j["format"] = kBankFormat;
  j["version"] = kBankVersion;
  j["class_ids"] = bank.class_ids;
  j["dim"] = bank.dim;
  j["provenance"] = ProvenanceName(bank.provenance);
  j["init"] = bank.init;
  j["shots"] = bank.shots;
  j["seed"] = std::to_string(bank.seed);
  j["config_hash"] = bank.config_hash;
  j["payload"] = {{"encoding", "base64"},
                  {"dtype", "f32le"},
                  {"data", Base64Encode(bytes)}};
  std::ofstream os(path);
  os << j.dump(1) << '\n';
  if (!os) throw Error(Errc::kIo, "cannot write " + path.string());
}

PromptBank LoadPromptBank(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::kIo, "cannot open prompt bank " + path.string());
  PromptBank bank;
  try {
    const Json j = Json::parse(is);
    if (j.at("format").get<std::string>() != kBankFormat) {
      throw Error(Errc::kCorruptFile, path.string() + " is not a prompt bank");
    }
    if (j.at("version").get<int>() != kBankVersion) {
      throw Error(Errc::kVersionMismatch,
                  path.string() + ": unsupported prompt bank version");
    }
    bank.class_ids = j.at("class_ids").get<std::vector<int>>();
    bank.dim = j.at("dim").get<std::size_t>();
    bank.provenance = ParseProvenance(j.at("provenance").get<std::string>());
    bank.init = j.at("init").get<std::string>();
    bank.shots = j.at("shots").get<int>();
    bank.seed = std::stoull(j.at("seed").get<std::string>());
    bank.config_hash = j.at("config_hash").get<std::string>();
    const std::vector<std::uint8_t> bytes =
        Base64Decode(j.at("payload").at("data").get<std::string>());
    if (bytes.size() % sizeof(float) != 0) {
      throw Error(Errc::kCorruptFile, path.string() + ": ragged payload");
    }
    bank.prompts.resize(bytes.size() / sizeof(float));
    std::memcpy(bank.prompts.data(), bytes.data(), bytes.size());
  } catch (const Json::exception& e) {
    throw Error(Errc::kCorruptFile,
                path.string() + ": malformed prompt bank: " + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(Errc::kCorruptFile, path.string() + ": malformed seed");
  }
  try {
    ValidateBank(bank);
  } catch (const Error& e) {
    throw Error(Errc::kCorruptFile, path.string() + ": " + e.what());
  }
  return bank;
}

PromptBank InitFromEmbeddings(
    const std::map<int, std::vector<std::vector<float>>>& embeddings) {
  PromptBank bank;
  for (const auto& [k, list] : embeddings) {
    if (list.empty()) {
      throw Error(Errc::kEmptyClass,
                  "class " + std::to_string(k) + " has no samples");
    }
    const std::size_t d = list.front().size();
    if (bank.dim == 0) bank.dim = d;
    std::vector<double> acc(d, 0.0);
    for (const std::vector<float>& e : list) {
      if (e.size() != bank.dim) {
        throw Error(Errc::kDimensionMismatch, "embedding dimensions differ");
      }
      for (std::size_t i = 0; i < d; ++i) acc[i] += e[i];
    }
    bank.class_ids.push_back(k);
    for (std::size_t i = 0; i < d; ++i) {
      bank.prompts.push_back(
          static_cast<float>(acc[i] / static_cast<double>(list.size())));
    }
  }
  if (bank.class_ids.empty()) {
    throw Error(Errc::kEmptyClass, "no classes to initialize");
  }
  bank.provenance = Provenance::kInitial;
  return bank;
}

PromptBank InitPrompts(models::SedModel& sed,
                       const corpus::CorpusManifest& shots_manifest,
                       const corpus::SourceSet& sources) {
  std::map<int, std::vector<std::vector<float>>> emb;
  for (const corpus::ClassSpec& c : shots_manifest.classes) {
    emb[c.class_id];
  }
  for (const corpus::ManifestEntry& e : shots_manifest.entries) {
    emb[e.class_id].push_back(sed.Embed(sources.Get(e)));
  }
  // Keep manifest class order.
  PromptBank sorted = InitFromEmbeddings(emb);
  PromptBank bank = sorted;
  bank.class_ids.clear();
  bank.prompts.clear();
  for (const corpus::ClassSpec& c : shots_manifest.classes) {
    std::span<const float> r = sorted.Row(c.class_id);
    bank.class_ids.push_back(c.class_id);
    bank.prompts.insert(bank.prompts.end(), r.begin(), r.end());
  }
  bank.shots = shots_manifest.samples_per_class;
  return bank;
}

PromptBank RandomPrompts(const std::vector<int>& class_ids, std::size_t dim,
                         std::uint64_t seed, double scale) {
  PromptBank bank;
  bank.class_ids = class_ids;
  bank.dim = dim;
  bank.init = "random";
  bank.seed = seed;
  const Rng root = Rng(seed).Child("random-init");
  for (int k : class_ids) {
    Rng rng = root.Child(static_cast<std::uint64_t>(k));
    for (std::size_t i = 0; i < dim; ++i) {
      bank.prompts.push_back(static_cast<float>(scale * rng.Normal()));
    }
  }
  ValidateBank(bank);
  return bank;
}

std::size_t StepsPerClass(const TuneConfig& cfg,
                          const corpus::CorpusManifest& train) {
  const std::size_t k = std::max<std::size_t>(1, train.classes.size());
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  if (cfg.steps_per_epoch > 0) {
    return (static_cast<std::size_t>(cfg.steps_per_epoch) + k - 1) / k;
  }
  const std::size_t shots = static_cast<std::size_t>(train.samples_per_class);
  return (shots * 4 + bs - 1) / bs;
}

PromptBank TunePrompts(models::UssModel& uss, const PromptBank& bank,
                       const corpus::CorpusManifest& train,
                       const corpus::SourceSet& sources,
                       const TuneConfig& cfg, TuneStats* stats,
                       const models::ProgressFn& progress) {
  CheckTuneConfig(cfg);
  ValidateBank(bank);
  if (bank.provenance != Provenance::kInitial) {
    throw Error(Errc::kInvalidArgument,
                "prompt tuning starts from an initial bank, got " +
                    std::string(ProvenanceName(bank.provenance)));
  }
  if (bank.dim != uss.embed_dim()) {
    throw Error(Errc::kDimensionMismatch, "bank and separator dimensions differ");
  }
  const std::vector<int> classes = TunedClasses(bank, cfg, train);
  std::map<int, grad::Tensor<float>> rows = MakeRows(bank, classes);
  grad::AdamOptions opts;
  opts.learning_rate = cfg.learning_rate;
  std::map<int, std::unique_ptr<grad::Adam>> adams;
  for (auto& [k, t] : rows) {
    adams[k] = std::make_unique<grad::Adam>(opts);
    adams[k]->Register(&t);
  }
  uss.SetParamsTrainable(false);
  uss.SetPromptTrainable(true);
  RunSchedule(uss, train, sources, cfg, classes, rows, stats, progress,
              [&](int k) { adams.at(k)->Step(); });
  uss.SetPromptTrainable(false);
  if (stats) {
    stats->optimizer_state = 0;
    for (const auto& [k, a] : adams) stats->optimizer_state += a->state_size();
  }
  PromptBank out = bank;
  WriteRows(rows, out);
  out.provenance = Provenance::kTuned;
  out.seed = cfg.seed;
  out.config_hash = cfg.config_hash;
  ValidateBank(out);
  return out;
}

JointResult JointFinetune(const models::Checkpoint& uss_ckpt,
                          const PromptBank& bank,
                          const corpus::CorpusManifest& train,
                          const corpus::SourceSet& sources,
                          const TuneConfig& cfg,
                          const models::ProgressFn& progress) {
  CheckTuneConfig(cfg);
  ValidateBank(bank);
  if (bank.provenance != Provenance::kInitial) {
    throw Error(Errc::kInvalidArgument,
                "joint tuning starts from an initial bank");
  }
  models::Checkpoint working = uss_ckpt;
  working.SetFrozen(false);
  models::UssModel uss(std::move(working));
  if (bank.dim != uss.embed_dim()) {
    throw Error(Errc::kDimensionMismatch, "bank and separator dimensions differ");
  }
  const std::vector<int> classes = TunedClasses(bank, cfg, train);
  std::map<int, grad::Tensor<float>> rows = MakeRows(bank, classes);
  grad::AdamOptions opts;
  opts.learning_rate = cfg.learning_rate;
  grad::Adam adam(opts);
  uss.SetParamsTrainable(true);
  uss.SetPromptTrainable(true);
  for (models::NamedTensor& t : uss.mutable_checkpoint().tensors) {
    adam.Register(&t.value);
  }
  for (auto& [k, t] : rows) adam.Register(&t);
  JointResult r;
  RunSchedule(uss, train, sources, cfg, classes, rows, &r.stats, progress,
              [&](int) { adam.Step(); });
  r.stats.optimizer_state = adam.state_size();
  uss.SetParamsTrainable(false);
  uss.SetPromptTrainable(false);
  r.uss = uss.checkpoint();
  r.uss.SetFrozen(true);
  r.uss.config_hash = cfg.config_hash;
  r.uss.epoch = uss_ckpt.epoch + cfg.epochs;
  r.bank = bank;
  WriteRows(rows, r.bank);
  r.bank.provenance = Provenance::kJointTuned;
  r.bank.seed = cfg.seed;
  r.bank.config_hash = cfg.config_hash;
  ValidateBank(r.bank);
  return r;
}

PromptLossProbe::PromptLossProbe(const models::Checkpoint& uss,
                                 const corpus::MixtureExample& example)
    : config_([&] {
        models::UssConfig c;
        models::ParseUssCheckpoint(uss, &c, &audio_);
        return c;
      }()),
      net_(config_, audio_) {
  for (const auto& [name, id] : net_.params) {
    params_.push_back(uss.Get(name).Cast<double>());
  }
  const models::UssInput in = models::PrepareUssInput(example.mixture, audio_);
  features_ = in.features.Cast<double>();
  real_ = in.real.Cast<double>();
  imag_ = in.imag.Cast<double>();
  target_ = grad::Tensor<float>({example.target.size()},
                                example.target.samples)
                .Cast<double>();
}

double PromptLossProbe::Loss(std::span<const double> prompt) {
  return LossAndGrad(prompt, nullptr);
}

double PromptLossProbe::LossAndGrad(std::span<const double> prompt,
                                    std::vector<double>* grad) {
  if (prompt.size() != config_.embed_dim) {
    throw Error(Errc::kDimensionMismatch, "probe prompt dimension");
  }
  grad::Tensor<double> p({1, prompt.size()},
                         std::vector<double>(prompt.begin(), prompt.end()));
  grad::Bindings<double> b;
  for (std::size_t i = 0; i < net_.params.size(); ++i) {
    b.Bind(net_.params[i].second, params_[i]);
  }
  b.Bind(net_.features, features_);
  b.Bind(net_.real, real_);
  b.Bind(net_.imag, imag_);
  b.Bind(net_.prompt, p);
  b.Bind(net_.target, target_);
  net_.graph.SetTrainable(net_.prompt, grad != nullptr);
  const double loss = net_.graph.Evaluate(b)[0];
  if (grad != nullptr) {
    const auto grads = net_.graph.Backpropagate(grad::Tensor<double>({1}, {1.0}));
    const grad::Tensor<double>& g = grads.at(net_.prompt);
    grad->assign(g.data().begin(), g.data().end());
  }
  return loss;
}

}  // namespace aptsep::apt
