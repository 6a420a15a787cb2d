// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/cli/config.h"

#include <charconv>
#include <fstream>

#include "aptsep/common/error.h"
#include "aptsep/common/hash.h"

namespace aptsep::cli {
namespace {

using Json = nlohmann::json;

[[noreturn]] void Invalid(const std::string& what) {
  throw Error(Errc::kInvalidArgument, what);
}

template <typename T>
void Read(const Json& section, const char* key, T* out) {
  if (!section.contains(key)) return;
  try {
    *out = section.at(key).get<T>();
  } catch (const Json::exception&) {
    Invalid(std::string("config field '") + key + "' has the wrong type");
  }
}

void CheckKeys(const Json& section, const std::string& where,
               std::initializer_list<const char*> allowed) {
  if (!section.is_object()) Invalid("config section '" + where + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) Invalid("unknown config field '" + where + key + "'");
  }
}

// Full-data sorts after every finite shot count.
long ShotsOrder(int shots) { return shots == kFullShots ? 1L << 40 : shots; }

}  // namespace

std::string ShotsName(int shots) {
  return shots == kFullShots ? "full" : std::to_string(shots);
}

int ParseShots(const std::string& text) {
  if (text == "full") return kFullShots;
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || v <= 0) {
    Invalid("shots must be a positive integer or 'full', got '" + text + "'");
  }
  return v;
}

corpus::CorpusConfig ExperimentConfig::Corpus() const {
  corpus::CorpusConfig c;
  c.sample_rate = sample_rate;
  c.clip_seconds = clip_seconds;
  c.samples_per_class = samples_per_class;
  c.train_fraction = train_fraction;
  c.master_seed = master_seed;
  return c;
}

models::AudioConfig ExperimentConfig::Audio() const {
  models::AudioConfig a;
  a.sample_rate = sample_rate;
  a.clip_length = Corpus().clip_length();
  a.n_fft = n_fft;
  a.hop = hop;
  a.n_mels = n_mels;
  return a;
}

std::uint64_t ExperimentConfig::RunSeed(int offset) const {
  return master_seed + static_cast<std::uint64_t>(offset);
}

models::PretrainConfig ExperimentConfig::Pretrain(int offset) const {
  models::PretrainConfig p;
  p.audio = Audio();
  p.sed.embed_dim = embed_dim;
  p.sed.channels = sed_channels;
  p.uss.embed_dim = embed_dim;
  p.uss.channels = uss_channels;
  p.sed_epochs = sed_epochs;
  p.uss_epochs = uss_epochs;
  p.uss_steps_per_epoch = uss_steps_per_epoch;
  p.batch_size = pretrain_batch_size;
  p.adam.learning_rate = pretrain_learning_rate;
  p.seed = RunSeed(offset);
  p.config_hash = ConfigHash(*this);
  return p;
}

apt::TuneConfig ExperimentConfig::Tune(int offset) const {
  apt::TuneConfig t;
  t.learning_rate = tune_learning_rate;
  t.batch_size = tune_batch_size;
  t.epochs = tune_epochs;
  t.steps_per_epoch = tune_steps_per_epoch;
  t.seed = RunSeed(offset);
  t.config_hash = ConfigHash(*this);
  return t;
}

Json ToJson(const ExperimentConfig& c) {
  Json shots = Json::array();
  for (int s : c.fewshot) {
    shots.push_back(s == kFullShots ? Json("full") : Json(s));
  }
  return Json{
      {"master_seed", c.master_seed},
      {"corpus",
       {{"sample_rate", c.sample_rate},
        {"clip_seconds", c.clip_seconds},
        {"samples_per_class", c.samples_per_class},
        {"train_fraction", c.train_fraction}}},
      {"model",
       {{"embed_dim", c.embed_dim},
        {"n_fft", c.n_fft},
        {"hop", c.hop},
        {"n_mels", c.n_mels},
        {"sed_channels", c.sed_channels},
        {"uss_channels", c.uss_channels}}},
      {"pretrain",
       {{"sed_epochs", c.sed_epochs},
        {"uss_epochs", c.uss_epochs},
        {"uss_steps_per_epoch", c.uss_steps_per_epoch},
        {"batch_size", c.pretrain_batch_size},
        {"learning_rate", c.pretrain_learning_rate}}},
      {"tune",
       {{"learning_rate", c.tune_learning_rate},
        {"batch_size", c.tune_batch_size},
        {"epochs", c.tune_epochs},
        {"steps_per_epoch", c.tune_steps_per_epoch},
        {"split", corpus::SplitName(c.target_split)}}},
      {"fewshot", shots},
      {"out_dir", c.out_dir},
  };
}

ExperimentConfig FromJson(const Json& j) {
  ExperimentConfig c;
  CheckKeys(j, "", {"master_seed", "corpus", "model", "pretrain", "tune",
                    "fewshot", "out_dir"});
  Read(j, "master_seed", &c.master_seed);
  Read(j, "out_dir", &c.out_dir);
  if (j.contains("corpus")) {
    const Json& s = j.at("corpus");
    CheckKeys(s, "corpus.", {"sample_rate", "clip_seconds", "samples_per_class",
                             "train_fraction"});
    Read(s, "sample_rate", &c.sample_rate);
    Read(s, "clip_seconds", &c.clip_seconds);
    Read(s, "samples_per_class", &c.samples_per_class);
    Read(s, "train_fraction", &c.train_fraction);
  }
  if (j.contains("model")) {
    const Json& s = j.at("model");
    CheckKeys(s, "model.", {"embed_dim", "n_fft", "hop", "n_mels",
                            "sed_channels", "uss_channels"});
    Read(s, "embed_dim", &c.embed_dim);
    Read(s, "n_fft", &c.n_fft);
    Read(s, "hop", &c.hop);
    Read(s, "n_mels", &c.n_mels);
    Read(s, "sed_channels", &c.sed_channels);
    Read(s, "uss_channels", &c.uss_channels);
  }
  if (j.contains("pretrain")) {
    const Json& s = j.at("pretrain");
    CheckKeys(s, "pretrain.", {"sed_epochs", "uss_epochs", "uss_steps_per_epoch",
                               "batch_size", "learning_rate"});
    Read(s, "sed_epochs", &c.sed_epochs);
    Read(s, "uss_epochs", &c.uss_epochs);
    Read(s, "uss_steps_per_epoch", &c.uss_steps_per_epoch);
    Read(s, "batch_size", &c.pretrain_batch_size);
    Read(s, "learning_rate", &c.pretrain_learning_rate);
  }
  if (j.contains("tune")) {
    const Json& s = j.at("tune");
    CheckKeys(s, "tune.", {"learning_rate", "batch_size", "epochs",
                           "steps_per_epoch", "split"});
    Read(s, "learning_rate", &c.tune_learning_rate);
    Read(s, "batch_size", &c.tune_batch_size);
    Read(s, "epochs", &c.tune_epochs);
    Read(s, "steps_per_epoch", &c.tune_steps_per_epoch);
    std::string split = corpus::SplitName(c.target_split);
    Read(s, "split", &split);
    c.target_split = corpus::ParseSplit(split);
  }
  if (j.contains("fewshot")) {
    const Json& s = j.at("fewshot");
    if (!s.is_array() || s.empty()) Invalid("fewshot must be a non-empty list");
    c.fewshot.clear();
    for (const Json& v : s) {
      if (v.is_string()) {
        c.fewshot.push_back(ParseShots(v.get<std::string>()));
      } else if (v.is_number_integer()) {
        c.fewshot.push_back(ParseShots(std::to_string(v.get<long>())));
      } else {
        Invalid("fewshot entries must be integers or 'full'");
      }
    }
  }
  for (std::size_t i = 1; i < c.fewshot.size(); ++i) {
    if (ShotsOrder(c.fewshot[i]) <= ShotsOrder(c.fewshot[i - 1])) {
      Invalid("fewshot list must be strictly increasing");
    }
  }
  if (c.sample_rate <= 0 || c.clip_seconds <= 0 || c.samples_per_class <= 0 ||
      c.train_fraction <= 0 || c.train_fraction >= 1) {
    Invalid("corpus parameters out of range");
  }
  if (c.embed_dim == 0 || c.sed_epochs < 0 || c.uss_epochs < 0 ||
      c.tune_epochs < 0 || c.pretrain_batch_size <= 0 || c.tune_batch_size <= 0 ||
      c.uss_steps_per_epoch < 0 || c.tune_steps_per_epoch < 0 ||
      !(c.pretrain_learning_rate > 0) || !(c.tune_learning_rate > 0)) {
    Invalid("model or training parameters out of range");
  }
  for (int s : c.fewshot) {
    if (s != kFullShots && s > c.Corpus().train_count()) {
      Invalid("fewshot setting " + std::to_string(s) +
              " exceeds the train split of " +
              std::to_string(c.Corpus().train_count()));
    }
  }
  return c;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::kIo, "cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(is);
  } catch (const Json::exception& e) {
    throw Error(Errc::kCorruptFile,
                "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return FromJson(j);
}

void ApplyOverride(Json& j, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    Invalid("override '" + assignment + "' is not of the form key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::exception&) {
    value = text;
  }
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) Invalid("override path '" + path + "' has an empty key");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (!node->is_object()) {
      if (!node->is_null()) Invalid("override path '" + path + "' crosses a value");
      *node = Json::object();
    }
    start = dot + 1;
  }
}

std::string ConfigHash(const ExperimentConfig& config) {
  const Json full = ToJson(config);
  const Json scope{{"master_seed", full.at("master_seed")},
                   {"corpus", full.at("corpus")},
                   {"model", full.at("model")},
                   {"pretrain", full.at("pretrain")}};
  return Sha256Hex(scope.dump());
}

}  // namespace aptsep::cli
