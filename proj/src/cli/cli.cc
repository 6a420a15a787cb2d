// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/cli/cli.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"
#include "aptsep/apt/apt.h"
#include "aptsep/cli/config.h"
#include "aptsep/common/error.h"
#include "aptsep/common/hash.h"
#include "aptsep/common/rng.h"
#include "aptsep/corpus/corpus.h"
#include "aptsep/eval/eval.h"
#include "aptsep/models/checkpoint.h"
#include "aptsep/models/models.h"
#include "aptsep/models/pretrain.h"
#include "json.hpp"

namespace aptsep::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

fs::path Layout::SeedDir(int offset) const {
  return root / ("seed-" + std::to_string(offset));
}
fs::path Layout::SedCheckpoint(int offset) const {
  return SeedDir(offset) / "sed.ckpt";
}
fs::path Layout::UssCheckpoint(int offset) const {
  return SeedDir(offset) / "uss.ckpt";
}
fs::path Layout::JointCheckpoint(int offset, int shots) const {
  return SeedDir(offset) / ("uss-joint-" + ShotsName(shots) + ".ckpt");
}
fs::path Layout::PretrainLog(int offset) const {
  return SeedDir(offset) / "pretrain.json";
}
fs::path Layout::Bank(int offset, const std::string& kind, int shots) const {
  return SeedDir(offset) / ("bank-" + kind + "-" + ShotsName(shots) + ".json");
}
fs::path Layout::TuneLog(int offset, const std::string& kind, int shots) const {
  return SeedDir(offset) / (kind + "-" + ShotsName(shots) + ".log.json");
}
fs::path Layout::Report(int offset, const std::string& system, int shots,
                        const std::string& ext) const {
  if (system == "oracle" || system == "mixture") {
    return SeedDir(offset) / ("report-" + system + "." + ext);
  }
  return SeedDir(offset) /
         ("report-" + system + "-" + ShotsName(shots) + "." + ext);
}
fs::path Layout::Embeddings(int offset) const {
  return SeedDir(offset) / "embeddings.csv";
}
fs::path Layout::Projection(int offset, int shots) const {
  return SeedDir(offset) / ("projection-" + ShotsName(shots) + ".csv");
}

int WorkerThreads() {
  if (const char* env = std::getenv("APT_SEP_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const char* const kSubcommands[] = {
    "gen-corpus", "pretrain",      "init-prompts",      "tune",
    "joint-tune", "eval",          "fewshot-sweep",     "export-embeddings"};

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  int seed = 0;
  int seeds = 1;
  std::string shots;
  std::string system = "apt";
  std::string bank;
  std::string checkpoint;
  bool force = false;
  bool random_init = false;
  bool verbose = false;
};

struct Context {
  std::string command;
  Flags flags;
  ExperimentConfig cfg;
  std::string hash;
  Layout layout;
  int threads = 1;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
  std::string metric_name;
  double metric = 0.0;

  std::uint64_t run_seed() const { return cfg.RunSeed(flags.seed); }
  models::ProgressFn Progress() const {
    if (!flags.verbose) return {};
    std::ostream* e = err;
    return [e](const std::string& line) { *e << line << '\n'; };
  }
};

void RequireFile(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) {
    throw UsageError(what + " not found: " + path.string());
  }
}

void CheckHash(const Context& c, const std::string& what,
               const std::string& hash) {
  if (hash == c.hash) return;
  const std::string msg = what + " carries config hash '" + hash +
                          "' but the current config hash is '" + c.hash + "'";
  if (c.flags.force) {
    *c.err << "warning: " << msg << " (--force)\n";
    return;
  }
  throw Error(Errc::kHashMismatch, msg + "; pass --force to override");
}

int SingleShots(const Context& c) {
  return c.flags.shots.empty() ? kFullShots : ParseShots(c.flags.shots);
}

std::vector<int> ShotsList(const Context& c) {
  if (c.flags.shots.empty()) return c.cfg.fewshot;
  std::vector<int> list;
  std::stringstream ss(c.flags.shots);
  std::string item;
  while (std::getline(ss, item, ',')) list.push_back(ParseShots(item));
  ExperimentConfig probe = c.cfg;
  Json j = ToJson(probe);
  j["fewshot"] = Json::array();
  for (int s : list) j["fewshot"].push_back(ShotsName(s));
  return FromJson(j).fewshot;
}

struct CorpusData {
  corpus::CorpusManifest manifest;
  corpus::SourceSet sources;
  corpus::CorpusManifest split;
};

CorpusData LoadCorpus(const Context& c) {
  RequireFile(c.layout.Manifest(), "corpus manifest");
  CorpusData d;
  d.manifest = corpus::LoadManifest(c.layout.Manifest());
  CheckHash(c, "corpus manifest", d.manifest.config_hash);
  d.sources = corpus::SourceSet::Load(d.manifest, c.layout.CorpusDir());
  d.split = corpus::SelectSplit(d.manifest, c.cfg.target_split);
  return d;
}

corpus::CorpusManifest ShotsManifest(const corpus::CorpusManifest& split,
                                     int shots, std::uint64_t seed) {
  if (shots == kFullShots) return corpus::TrainPart(split);
  return corpus::SampleFewShot(split, shots, seed);
}

models::Checkpoint LoadStamped(const Context& c, const fs::path& path,
                               const std::string& what) {
  RequireFile(path, what);
  models::Checkpoint ckpt = models::LoadCheckpoint(path);
  CheckHash(c, what + " " + path.string(), ckpt.config_hash);
  return ckpt;
}

apt::PromptBank LoadBank(const Context& c, const fs::path& path,
                         const std::string& what) {
  RequireFile(path, what);
  apt::PromptBank bank = apt::LoadPromptBank(path);
  CheckHash(c, what + " " + path.string(), bank.config_hash);
  return bank;
}

void WriteJson(const fs::path& path, const Json& j) {
  std::ofstream os(path);
  os << j.dump(1) << '\n';
  if (!os) throw Error(Errc::kIo, "cannot write " + path.string());
}

apt::PromptBank InitialBank(const Context& c, const models::Checkpoint& sed_ckpt,
                            const corpus::CorpusManifest& shots_manifest,
                            const corpus::SourceSet& sources, int offset) {
  models::SedModel sed(sed_ckpt);
  apt::PromptBank bank = apt::InitPrompts(sed, shots_manifest, sources);
  if (c.flags.random_init) {
    double sq = 0.0;
    for (float v : bank.prompts) sq += static_cast<double>(v) * v;
    const double rms = std::sqrt(sq / static_cast<double>(bank.prompts.size()));
    const int shots = bank.shots;
    bank = apt::RandomPrompts(bank.class_ids, bank.dim,
                              Rng(c.cfg.RunSeed(offset)).Child("random-init").key(),
                              rms);
    bank.shots = shots;
  }
  bank.seed = c.cfg.RunSeed(offset);
  bank.config_hash = c.hash;
  return bank;
}

std::vector<corpus::MixtureExample> TestMixtures(const Context& c,
                                                 const CorpusData& d,
                                                 int offset) {
  return corpus::FixedTestMixtures(corpus::TestPart(d.split), d.sources,
                                   d.manifest.clip_length(),
                                   c.cfg.RunSeed(offset));
}

eval::EvalReport Stamp(eval::EvalReport r, const Context& c, int offset,
                       int shots) {
  r.shots = shots;
  r.seed = c.cfg.RunSeed(offset);
  r.config_hash = c.hash;
  return r;
}

void WriteReport(const Context& c, const eval::EvalReport& r, int offset,
                 int shots, bool csv) {
  eval::EmitReport(r, c.layout.Report(offset, r.system, shots, "json"),
                   eval::ReportFormat::kJson);
  if (csv) {
    eval::EmitReport(r, c.layout.Report(offset, r.system, shots, "csv"),
                     eval::ReportFormat::kCsv);
  }
}

Json StatsJson(const apt::TuneStats& s) {
  return Json{{"epoch_loss", s.epoch_loss},
              {"optimizer_state", s.optimizer_state},
              {"steps", s.steps}};
}

// ---- subcommands ----

void GenCorpus(Context& c) {
  corpus::CorpusManifest m = corpus::BuildCorpus(c.cfg.Corpus(), c.layout.CorpusDir());
  m.config_hash = c.hash;
  corpus::SaveManifest(m, c.layout.Manifest());
  c.metric_name = "entries";
  c.metric = static_cast<double>(m.entries.size());
  *c.out << "wrote " << m.entries.size() << " clips of " << m.classes.size()
         << " classes to " << c.layout.CorpusDir().string() << '\n';
}

void Pretrain(Context& c) {
  const CorpusData d = LoadCorpus(c);
  const corpus::CorpusManifest seen =
      corpus::SelectSplit(d.manifest, corpus::Split::kSeen);
  const models::PretrainConfig pc = c.cfg.Pretrain(c.flags.seed);
  models::PretrainResult r = models::PretrainBackbone(
      corpus::TrainPart(seen), d.sources, pc, c.Progress());
  fs::create_directories(c.layout.SeedDir(c.flags.seed));
  models::SaveCheckpoint(r.sed, c.layout.SedCheckpoint(c.flags.seed));
  models::SaveCheckpoint(r.uss, c.layout.UssCheckpoint(c.flags.seed));
  models::SedModel sed(r.sed);
  const double acc = models::SedAccuracy(sed, corpus::TestPart(seen), d.sources);
  WriteJson(c.layout.PretrainLog(c.flags.seed),
            {{"config_hash", c.hash},
             {"seed", std::to_string(pc.seed)},
             {"sed_heldout_accuracy", acc},
             {"sed_epoch_loss", r.sed_epoch_loss},
             {"uss_epoch_loss", r.uss_epoch_loss}});
  c.metric_name = "sed_heldout_accuracy";
  c.metric = acc;
  *c.out << "pretrained seed offset " << c.flags.seed
         << ": SED held-out accuracy " << acc << ", separator final loss "
         << (r.uss_epoch_loss.empty() ? 0.0 : r.uss_epoch_loss.back()) << '\n';
}

void InitPromptsCmd(Context& c) {
  const CorpusData d = LoadCorpus(c);
  const int shots = SingleShots(c);
  const models::Checkpoint sed =
      LoadStamped(c, c.layout.SedCheckpoint(c.flags.seed), "SED checkpoint");
  const apt::PromptBank bank = InitialBank(
      c, sed, ShotsManifest(d.split, shots, c.run_seed()), d.sources, c.flags.seed);
  apt::SavePromptBank(bank, c.layout.Bank(c.flags.seed, "initial", shots));
  c.metric_name = "classes";
  c.metric = static_cast<double>(bank.class_ids.size());
  *c.out << "initialized " << bank.class_ids.size() << " prompts ("
         << bank.init << ", " << bank.shots << " shots)\n";
}

void TuneCmd(Context& c, bool joint) {
  const CorpusData d = LoadCorpus(c);
  const int shots = SingleShots(c);
  const int o = c.flags.seed;
  const apt::PromptBank initial =
      LoadBank(c, c.layout.Bank(o, "initial", shots), "initial prompt bank");
  const fs::path uss_path = c.layout.UssCheckpoint(o);
  const fs::path sed_path = c.layout.SedCheckpoint(o);
  const models::Checkpoint uss_ckpt = LoadStamped(c, uss_path, "USS checkpoint");
  RequireFile(sed_path, "SED checkpoint");
  const std::string uss_before = Sha256File(uss_path);
  const std::string sed_before = Sha256File(sed_path);
  const corpus::CorpusManifest train = ShotsManifest(d.split, shots, c.run_seed());
  const apt::TuneConfig tc = c.cfg.Tune(o);
  Json log;
  double final_loss = 0.0;
  if (joint) {
    apt::JointResult r = apt::JointFinetune(uss_ckpt, initial, train, d.sources,
                                            tc, c.Progress());
    r.uss.config_hash = c.hash;
    models::SaveCheckpoint(r.uss, c.layout.JointCheckpoint(o, shots));
    apt::SavePromptBank(r.bank, c.layout.Bank(o, "joint", shots));
    log = StatsJson(r.stats);
    if (!r.stats.epoch_loss.empty()) final_loss = r.stats.epoch_loss.back();
  } else {
    models::UssModel uss(uss_ckpt);
    apt::TuneStats stats;
    const apt::PromptBank tuned = apt::TunePrompts(uss, initial, train, d.sources,
                                                   tc, &stats, c.Progress());
    apt::SavePromptBank(tuned, c.layout.Bank(o, "tuned", shots));
    log = StatsJson(stats);
    log["trainable_parameters"] = apt::CountTrainable(tuned);
    if (!stats.epoch_loss.empty()) final_loss = stats.epoch_loss.back();
  }
  const std::string uss_after = Sha256File(uss_path);
  const std::string sed_after = Sha256File(sed_path);
  if (uss_before != uss_after || sed_before != sed_after) {
    throw Error(Errc::kHashMismatch, "a frozen backbone checkpoint changed during tuning");
  }
  log["config_hash"] = c.hash;
  log["seed"] = std::to_string(tc.seed);
  log["uss_sha256"] = uss_after;
  log["sed_sha256"] = sed_after;
  WriteJson(c.layout.TuneLog(o, joint ? "joint" : "tune", shots), log);
  c.metric_name = "final_epoch_loss";
  c.metric = final_loss;
  *c.out << (joint ? "joint-tuned " : "tuned ") << initial.class_ids.size()
         << " prompts, final epoch loss " << final_loss << '\n';
}

void EvalCmd(Context& c) {
  const std::string& system = c.flags.system;
  const int shots = SingleShots(c);
  const int o = c.flags.seed;
  if (system != "baseline" && system != "apt" && system != "joint" &&
      system != "oracle" && system != "mixture") {
    throw UsageError("unknown --system '" + system +
                     "' (baseline, apt, joint, oracle, mixture)");
  }
  if (!c.flags.bank.empty()) RequireFile(c.flags.bank, "prompt bank");
  if (!c.flags.checkpoint.empty()) RequireFile(c.flags.checkpoint, "USS checkpoint");
  const CorpusData d = LoadCorpus(c);
  const std::vector<corpus::MixtureExample> test = TestMixtures(c, d, o);
  fs::create_directories(c.layout.SeedDir(o));
  eval::EvalReport report;
  if (system == "oracle") {
    report = eval::IdealMaskOracle(test, c.cfg.Audio());
  } else if (system == "mixture") {
    report = eval::MixtureReport(test);
  } else {
    const std::string kind = system == "baseline" ? "initial"
                             : system == "apt"    ? "tuned"
                                                  : "joint";
    const fs::path bank_path = c.flags.bank.empty()
                                   ? c.layout.Bank(o, kind, shots)
                                   : fs::path(c.flags.bank);
    const fs::path ckpt_path = !c.flags.checkpoint.empty()
                                   ? fs::path(c.flags.checkpoint)
                               : system == "joint" ? c.layout.JointCheckpoint(o, shots)
                                                   : c.layout.UssCheckpoint(o);
    const apt::PromptBank bank = LoadBank(c, bank_path, "prompt bank");
    const models::Checkpoint ckpt = LoadStamped(c, ckpt_path, "USS checkpoint");
    const std::string label = system == "baseline" ? "baseline-zero-shot" : system;
    report = eval::EvaluateSystem(ckpt, bank, test, label, c.threads);
    if (system != "baseline") {
      const apt::PromptBank base_bank =
          LoadBank(c, c.layout.Bank(o, "initial", shots), "initial prompt bank");
      const models::Checkpoint base_ckpt =
          LoadStamped(c, c.layout.UssCheckpoint(o), "USS checkpoint");
      const eval::EvalReport base = eval::EvaluateSystem(
          base_ckpt, base_bank, test, "baseline-zero-shot", c.threads);
      eval::AttachBaseline(report, base);
    }
  }
  report = Stamp(std::move(report), c, o, shots);
  WriteReport(c, report, o, shots, true);
  c.metric_name = "overall_median_sdr";
  c.metric = report.overall_median;
  *c.out << report.system << ": median SDR " << report.overall_median
         << " dB over " << report.clip_count() << " mixtures";
  if (report.baseline_overall_median) {
    *c.out << " (baseline " << *report.baseline_overall_median << " dB)";
  }
  *c.out << '\n';
}

struct SweepCell {
  int offset = 0;
  int shots = 0;
  eval::EvalReport baseline;
  eval::EvalReport apt;
};

void SweepCmd(Context& c) {
  const CorpusData d = LoadCorpus(c);
  const std::vector<int> shots_list = ShotsList(c);
  if (c.flags.seeds <= 0) throw UsageError("--seeds must be positive");
  std::vector<SweepCell> cells;
  for (int s = 0; s < c.flags.seeds; ++s) {
    const int o = c.flags.seed + s;
    RequireFile(c.layout.SedCheckpoint(o), "SED checkpoint");
    RequireFile(c.layout.UssCheckpoint(o), "USS checkpoint");
    for (int shots : shots_list) cells.push_back({o, shots, {}, {}});
  }
  auto run_cell = [&](SweepCell& cell) {
    const int o = cell.offset;
    const models::Checkpoint sed =
        LoadStamped(c, c.layout.SedCheckpoint(o), "SED checkpoint");
    const models::Checkpoint uss_ckpt =
        LoadStamped(c, c.layout.UssCheckpoint(o), "USS checkpoint");
    const corpus::CorpusManifest train =
        ShotsManifest(d.split, cell.shots, c.cfg.RunSeed(o));
    const apt::PromptBank initial = InitialBank(c, sed, train, d.sources, o);
    apt::SavePromptBank(initial, c.layout.Bank(o, "initial", cell.shots));
    models::UssModel uss(uss_ckpt);
    const apt::PromptBank tuned =
        apt::TunePrompts(uss, initial, train, d.sources, c.cfg.Tune(o));
    apt::SavePromptBank(tuned, c.layout.Bank(o, "tuned", cell.shots));
    const std::vector<corpus::MixtureExample> test = TestMixtures(c, d, o);
    cell.baseline = Stamp(eval::EvaluateSystem(uss_ckpt, initial, test,
                                               "baseline-zero-shot"),
                          c, o, cell.shots);
    cell.apt = Stamp(eval::EvaluateSystem(uss_ckpt, tuned, test, "apt"), c, o,
                     cell.shots);
    eval::AttachBaseline(cell.apt, cell.baseline);
    WriteReport(c, cell.baseline, o, cell.shots, false);
    WriteReport(c, cell.apt, o, cell.shots, false);
  };
  for (int s = 0; s < c.flags.seeds; ++s) {
    fs::create_directories(c.layout.SeedDir(c.flags.seed + s));
  }
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(c.threads), cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  auto worker = [&](std::size_t w) {
    for (std::size_t i = w; i < cells.size(); i += workers) {
      try {
        run_cell(cells[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
      if (c.flags.verbose) {
        static std::mutex mu;
        std::lock_guard<std::mutex> lock(mu);
        *c.err << "finished seed offset " << cells[i].offset << " shots "
               << ShotsName(cells[i].shots) << '\n';
      }
    }
  };
  if (workers <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker, w);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  Json summary{{"config_hash", c.hash}, {"settings", Json::array()}};
  for (int shots : shots_list) {
    Json setting{{"shots", ShotsName(shots)}, {"per_seed", Json::array()}};
    std::vector<double> base, tuned;
    for (const SweepCell& cell : cells) {
      if (cell.shots != shots) continue;
      base.push_back(cell.baseline.overall_median);
      tuned.push_back(cell.apt.overall_median);
      setting["per_seed"].push_back(
          {{"seed_offset", cell.offset},
           {"seed", std::to_string(c.cfg.RunSeed(cell.offset))},
           {"baseline_median_sdr", cell.baseline.overall_median},
           {"apt_median_sdr", cell.apt.overall_median},
           {"improved_classes", eval::ImprovedClasses(cell.apt, cell.baseline)}});
    }
    setting["median_baseline_sdr"] = eval::Median(base);
    setting["median_apt_sdr"] = eval::Median(tuned);
    *c.out << "shots " << ShotsName(shots) << ": baseline "
           << setting["median_baseline_sdr"].get<double>() << " dB, apt "
           << setting["median_apt_sdr"].get<double>() << " dB (median of "
           << base.size() << " seeds)\n";
    c.metric_name = "median_apt_sdr_" + ShotsName(shots);
    c.metric = setting["median_apt_sdr"].get<double>();
    summary["settings"].push_back(setting);
  }
  WriteJson(c.layout.SweepSummary(), summary);
}

void ExportCmd(Context& c) {
  const CorpusData d = LoadCorpus(c);
  const int shots = SingleShots(c);
  const int o = c.flags.seed;
  const models::Checkpoint sed_ckpt =
      LoadStamped(c, c.layout.SedCheckpoint(o), "SED checkpoint");
  const apt::PromptBank initial =
      LoadBank(c, c.layout.Bank(o, "initial", shots), "initial prompt bank");
  const apt::PromptBank tuned =
      LoadBank(c, c.layout.Bank(o, "tuned", shots), "tuned prompt bank");
  models::SedModel sed(sed_ckpt);
  std::vector<std::pair<int, std::vector<float>>> samples;
  std::ofstream os(c.layout.Embeddings(o));
  os << "class_id,sample_index,role";
  for (std::size_t i = 0; i < initial.dim; ++i) os << ",e" << i;
  os << '\n';
  for (const corpus::ManifestEntry& e : d.split.entries) {
    std::vector<float> emb = sed.Embed(d.sources.Get(e));
    os << e.class_id << ',' << e.sample_index << ','
       << (e.train ? "train" : "test");
    for (float v : emb) os << ',' << v;
    os << '\n';
    samples.emplace_back(e.class_id, std::move(emb));
  }
  if (!os) throw Error(Errc::kIo, "cannot write " + c.layout.Embeddings(o).string());
  const eval::ProjectionSet p = eval::ProjectEmbeddings(samples, initial, tuned);
  eval::EmitProjectionCsv(p, c.layout.Projection(o, shots));
  c.metric_name = "mean_prompt_displacement";
  c.metric = eval::MeanDisplacement(p);
  *c.out << "exported " << samples.size() << " embeddings; mean prompt "
         << "displacement in the projection " << c.metric << '\n';
}

void LoadContext(Context& c) {
  if (c.flags.config.empty()) throw UsageError("missing --config PATH");
  if (!fs::exists(c.flags.config)) {
    throw UsageError("config file not found: " + c.flags.config);
  }
  Json j;
  {
    std::ifstream is(c.flags.config);
    try {
      j = Json::parse(is);
    } catch (const Json::exception& e) {
      throw Error(Errc::kCorruptFile,
                  "config " + c.flags.config + " is not valid JSON: " + e.what());
    }
  }
  for (const std::string& s : c.flags.sets) ApplyOverride(j, s);
  if (!c.flags.out.empty()) j["out_dir"] = c.flags.out;
  c.cfg = FromJson(j);
  c.hash = ConfigHash(c.cfg);
  c.layout.root = c.cfg.out_dir;
  c.threads = WorkerThreads();
}

void AppendRunLog(const Context& c, double seconds, int code,
                  const std::string& error) {
  if (c.layout.root.empty()) return;
  std::error_code ec;
  fs::create_directories(c.layout.root, ec);
  std::ofstream os(c.layout.RunLog(), std::ios::app);
  Json line{{"command", c.command},
            {"config_hash", c.hash},
            {"seed", std::to_string(c.cfg.RunSeed(c.flags.seed))},
            {"seed_offset", c.flags.seed},
            {"wall_seconds", seconds},
            {"exit_code", code}};
  if (!c.metric_name.empty()) {
    line["metric"] = {{"name", c.metric_name}, {"value", c.metric}};
  }
  if (!error.empty()) line["error"] = error;
  os << line.dump() << '\n';
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  if (args.empty()) {
    err << "error: no subcommand given; expected one of:";
    for (const char* s : kSubcommands) err << ' ' << s;
    err << '\n';
    return kExitUsage;
  }
  if (!args[0].empty() && args[0][0] != '-' &&
      std::none_of(std::begin(kSubcommands), std::end(kSubcommands),
                   [&](const char* s) { return args[0] == s; })) {
    err << "error: unknown subcommand '" << args[0] << "'\n";
    return kExitUsage;
  }

  Context c;
  c.out = &out;
  c.err = &err;
  CLI::App app{"Audio prompt tuning for query-based sound separation"};
  app.require_subcommand(1);
  std::vector<CLI::App*> subs;
  for (const char* name : kSubcommands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", c.flags.config, "Experiment config (JSON)");
    sub->add_option("--set", c.flags.sets, "Override a config field: key.path=value");
    sub->add_option("--out", c.flags.out, "Output directory");
    sub->add_option("--seed", c.flags.seed, "Seed offset added to master_seed");
    sub->add_flag("--force", c.flags.force, "Accept config hash mismatches");
    sub->add_flag("-v,--verbose", c.flags.verbose, "Print training progress");
    const std::string n = name;
    if (n == "init-prompts" || n == "tune" || n == "joint-tune" || n == "eval" ||
        n == "export-embeddings" || n == "fewshot-sweep") {
      sub->add_option("--shots", c.flags.shots,
                      n == "fewshot-sweep" ? "Comma-separated shot list, e.g. 1,5,10,full"
                                           : "Shot setting: N or full");
    }
    if (n == "init-prompts" || n == "fewshot-sweep") {
      sub->add_flag("--random-init", c.flags.random_init,
                    "Initialize prompts randomly (diagnostic)");
    }
    if (n == "fewshot-sweep") {
      sub->add_option("--seeds", c.flags.seeds, "Number of seed offsets to run");
    }
    if (n == "eval") {
      sub->add_option("--system", c.flags.system,
                      "baseline, apt, joint, oracle or mixture");
      sub->add_option("--bank", c.flags.bank, "Prompt bank path");
      sub->add_option("--checkpoint", c.flags.checkpoint, "USS checkpoint path");
    }
    subs.push_back(sub);
  }

  std::vector<std::string> argv_store{"aptsep"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  for (CLI::App* sub : subs) {
    if (sub->parsed()) c.command = sub->get_name();
  }

  const auto start = std::chrono::steady_clock::now();
  int code = kExitOk;
  std::string message;
  try {
    LoadContext(c);
    if (c.command == "gen-corpus") GenCorpus(c);
    else if (c.command == "pretrain") Pretrain(c);
    else if (c.command == "init-prompts") InitPromptsCmd(c);
    else if (c.command == "tune") TuneCmd(c, false);
    else if (c.command == "joint-tune") TuneCmd(c, true);
    else if (c.command == "eval") EvalCmd(c);
    else if (c.command == "fewshot-sweep") SweepCmd(c);
    else ExportCmd(c);
  } catch (const UsageError& e) {
    code = kExitUsage;
    message = e.what();
  } catch (const std::exception& e) {
    code = kExitRuntime;
    message = e.what();
  }
  if (code != kExitOk) err << "error: " << message << '\n';
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    AppendRunLog(c, seconds, code, message);
  } catch (const std::exception& e) {
    err << "warning: run log not written: " << e.what() << '\n';
  }
  return code;
}

int Run(const std::vector<std::string>& args) {
  return Run(args, std::cout, std::cerr);
}

}  // namespace aptsep::cli
