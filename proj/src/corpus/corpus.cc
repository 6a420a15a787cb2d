// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/corpus/corpus.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include "aptsep/common/error.h"
#include "aptsep/common/rng.h"
#include "aptsep/dsp/fft.h"
#include "json.hpp"

namespace aptsep::corpus {
namespace {

using Json = nlohmann::json;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Raised-cosine fade in and out, in place.
void Fade(std::vector<double>& x, std::size_t n) {
  n = std::min(n, x.size() / 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = 0.5 - 0.5 * std::cos(std::numbers::pi * i / n);
    x[i] *= g;
    x[x.size() - 1 - i] *= g;
  }
}

std::vector<double> BandNoise(Rng& rng, std::size_t length, int sr,
                              double centre, double width) {
  std::vector<double> noise(length);
  for (double& v : noise) v = rng.Normal();
  dsp::RealFft<double> fft(length);
  std::vector<std::complex<double>> bins(fft.bins());
  fft.Forward(noise, bins);
  const double lo = centre - width / 2, hi = centre + width / 2;
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const double f = static_cast<double>(k) * sr / length;
    if (f < lo || f > hi) bins[k] = 0.0;
  }
  fft.Inverse(bins, noise);
  return noise;
}

std::vector<double> Harmonic(const ClassSpec& s, Rng& rng, std::size_t length,
                             int sr) {
  const double f0 = rng.Uniform(s.primary.lo, s.primary.hi);
  const double vib_rate = rng.Uniform(s.secondary.lo, s.secondary.hi);
  const double vib_phase = rng.Uniform(0, kTwoPi);
  const int n_harm = std::clamp(static_cast<int>(0.45 * sr / f0), 1, 8);
  std::vector<double> amp(n_harm), phase0(n_harm);
  for (int h = 0; h < n_harm; ++h) {
    amp[h] = rng.Uniform(0.5, 1.0) / (h + 1);
    phase0[h] = rng.Uniform(0, kTwoPi);
  }
  std::vector<double> x(length, 0.0);
  double phase = 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / sr;
    for (int h = 0; h < n_harm; ++h) {
      x[i] += amp[h] * std::sin((h + 1) * phase + phase0[h]);
    }
    const double f = f0 * (1.0 + 0.01 * std::sin(kTwoPi * vib_rate * t +
                                                 vib_phase));
    phase += kTwoPi * f / sr;
  }
  return x;
}

std::vector<double> AmNoise(const ClassSpec& s, Rng& rng, std::size_t length,
                            int sr) {
  const double centre = rng.Uniform(s.primary.lo, s.primary.hi);
  const double rate = rng.Uniform(s.secondary.lo, s.secondary.hi);
  const double phase = rng.Uniform(0, kTwoPi);
  std::vector<double> x = BandNoise(rng, length, sr, centre, 300.0);
  for (std::size_t i = 0; i < length; ++i) {
    x[i] *= 0.5 * (1.0 + std::sin(kTwoPi * rate * i / sr + phase));
  }
  return x;
}

std::vector<double> Chirp(const ClassSpec& s, Rng& rng, std::size_t length,
                          int sr) {
  const double f_start = rng.Uniform(s.primary.lo, s.primary.hi);
  const double f_end = rng.Uniform(s.secondary.lo, s.secondary.hi);
  const double phase0 = rng.Uniform(0, kTwoPi);
  const double dur = static_cast<double>(length) / sr;
  std::vector<double> x(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double t = static_cast<double>(i) / sr;
    x[i] = std::sin(kTwoPi * (f_start * t + (f_end - f_start) * t * t /
                                                (2.0 * dur)) + phase0);
  }
  return x;
}

std::vector<double> Clicks(const ClassSpec& s, Rng& rng, std::size_t length,
                           int sr) {
  const double rate = rng.Uniform(s.primary.lo, s.primary.hi);
  const double res = rng.Uniform(s.secondary.lo, s.secondary.hi);
  const double tau = 0.0015;
  const std::size_t click_len = static_cast<std::size_t>(0.01 * sr);
  std::vector<double> x(length, 0.0);
  double t = rng.Uniform(0.0, 1.0 / rate);
  const double dur = static_cast<double>(length) / sr;
  while (t < dur) {
    const std::size_t start = static_cast<std::size_t>(t * sr);
    const double gain = rng.Uniform(0.7, 1.0);
    for (std::size_t j = 0; j < click_len && start + j < length; ++j) {
      const double u = static_cast<double>(j) / sr;
      x[start + j] += gain * std::exp(-u / tau) * std::sin(kTwoPi * res * u);
    }
    t += (1.0 + rng.Uniform(-0.05, 0.05)) / rate;
  }
  return x;
}

std::uint64_t EntrySeed(std::uint64_t master, int class_id, int index) {
  return Mix64(master ^ Mix64((static_cast<std::uint64_t>(class_id) << 32) |
                              static_cast<std::uint32_t>(index)));
}

std::string EntryPath(int class_id, int index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "audio/c%02d_s%03d.wav", class_id, index);
  return buf;
}

std::string Hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t ParseHex(const std::string& s) {
  try {
    return std::stoull(s, nullptr, 16);
  } catch (const std::exception&) {
    throw Error(Errc::kCorruptFile, "bad seed '" + s + "'");
  }
}

Json RangeJson(const Range& r) { return Json::array({r.lo, r.hi}); }
Range ParseRange(const Json& j) {
  return Range{j.at(0).get<double>(), j.at(1).get<double>()};
}

CorpusManifest Subset(const CorpusManifest& m,
                      const std::vector<ManifestEntry>& entries) {
  CorpusManifest out = m;
  out.entries = entries;
  std::set<int> present;
  for (const ManifestEntry& e : entries) present.insert(e.class_id);
  std::erase_if(out.classes, [&](const ClassSpec& c) {
    return present.count(c.class_id) == 0;
  });
  if (!out.classes.empty()) {
    out.samples_per_class =
        static_cast<int>(out.EntriesOf(out.classes.front().class_id).size());
  }
  return out;
}

MixtureExample DrawForEntry(const CorpusManifest& m, const SourceSet& sources,
                            std::size_t crop_len, std::size_t entry,
                            Rng& rng) {
  const ManifestEntry& t = m.entries[entry];
  std::vector<int> others;
  for (const ClassSpec& c : m.classes) {
    if (c.class_id != t.class_id) others.push_back(c.class_id);
  }
  if (others.empty()) {
    throw Error(Errc::kTooFewClasses, "mixing needs at least two classes");
  }
  const int l = others[rng.Below(others.size())];
  const std::vector<std::size_t> pool = m.EntriesOf(l);
  const ManifestEntry& j = m.entries[pool[rng.Below(pool.size())]];
  const dsp::Waveform& xt = sources.Get(t);
  const dsp::Waveform& xj = sources.Get(j);
  if (crop_len > xt.size() || crop_len > xj.size() || crop_len == 0) {
    throw Error(Errc::kInvalidArgument, "crop length exceeds clip length");
  }
  const std::size_t ot = rng.Below(xt.size() - crop_len + 1);
  const std::size_t oj = rng.Below(xj.size() - crop_len + 1);
  MixtureExample ex = Mix(xt, xj, ot, oj, crop_len);
  ex.target_class = t.class_id;
  ex.interferer_class = l;
  ex.target_sample = t.sample_index;
  ex.interferer_sample = j.sample_index;
  return ex;
}

void RequireTwoClasses(const CorpusManifest& m) {
  if (m.classes.size() < 2) {
    throw Error(Errc::kTooFewClasses, "mixing needs at least two classes");
  }
}

}  // namespace

const char* KindName(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::kHarmonicTone: return "harmonic-tone";
    case GeneratorKind::kBandpassNoise: return "bandpass-noise";
    case GeneratorKind::kAmNoise: return "am-noise";
    case GeneratorKind::kChirp: return "chirp";
    case GeneratorKind::kClickTrain: return "click-train";
  }
  return "unknown";
}

GeneratorKind ParseKind(const std::string& name) {
  for (GeneratorKind k :
       {GeneratorKind::kHarmonicTone, GeneratorKind::kBandpassNoise,
        GeneratorKind::kAmNoise, GeneratorKind::kChirp,
        GeneratorKind::kClickTrain}) {
    if (name == KindName(k)) return k;
  }
  throw Error(Errc::kInvalidArgument, "unknown generator kind '" + name + "'");
}

const char* SplitName(Split split) {
  return split == Split::kSeen ? "seen" : "unseen";
}

Split ParseSplit(const std::string& name) {
  if (name == "seen") return Split::kSeen;
  if (name == "unseen") return Split::kUnseen;
  throw Error(Errc::kInvalidArgument, "unknown split '" + name + "'");
}

std::vector<ClassSpec> DefaultClasses() {
  using K = GeneratorKind;
  const Split s = Split::kSeen, u = Split::kUnseen;
  return {
      {0, "hum_low", K::kHarmonicTone, s, {150, 220}, {3, 6}},
      {1, "hum_high", K::kHarmonicTone, s, {400, 550}, {3, 6}},
      {2, "hiss_mid", K::kBandpassNoise, s, {600, 800}, {150, 250}},
      {3, "hiss_high", K::kBandpassNoise, s, {2200, 2600}, {300, 500}},
      {4, "flutter", K::kAmNoise, s, {1200, 1500}, {4, 8}},
      {5, "rise", K::kChirp, s, {300, 500}, {1500, 2000}},
      {6, "tick_slow", K::kClickTrain, s, {5, 10}, {3600, 3900}},
      {7, "buzz", K::kClickTrain, s, {30, 40}, {1700, 1900}},
      {8, "drone", K::kHarmonicTone, u, {280, 360}, {3, 6}},
      {9, "whistle", K::kHarmonicTone, u, {650, 800}, {3, 6}},
      {10, "hiss_band", K::kBandpassNoise, u, {1000, 1150}, {150, 250}},
      {11, "fall", K::kChirp, u, {2400, 2600}, {700, 900}},
      {12, "tick_fast", K::kClickTrain, u, {15, 25}, {2700, 2900}},
      {13, "warble", K::kAmNoise, u, {3000, 3400}, {10, 16}},
  };
}

void ValidateClasses(const std::vector<ClassSpec>& classes) {
  std::set<int> ids;
  for (const ClassSpec& c : classes) {
    if (!ids.insert(c.class_id).second) {
      throw Error(Errc::kDuplicateClass,
                  "duplicate class_id " + std::to_string(c.class_id));
    }
    if (!(c.primary.lo > 0 && c.primary.lo <= c.primary.hi &&
          c.secondary.lo > 0 && c.secondary.lo <= c.secondary.hi)) {
      throw Error(Errc::kInvalidArgument,
                  "invalid parameter ranges for class " + c.name);
    }
  }
  for (std::size_t a = 0; a < classes.size(); ++a) {
    for (std::size_t b = a + 1; b < classes.size(); ++b) {
      if (classes[a].kind == classes[b].kind &&
          classes[a].primary.Overlaps(classes[b].primary)) {
        throw Error(Errc::kInvalidArgument,
                    "classes " + classes[a].name + " and " + classes[b].name +
                        " share a kind and overlapping ranges");
      }
    }
  }
}

dsp::Waveform GenerateClassSample(const ClassSpec& spec, std::uint64_t seed,
                                  int sample_rate, std::size_t length) {
  Rng rng(seed);
  std::vector<double> x;
  switch (spec.kind) {
    case GeneratorKind::kHarmonicTone:
      x = Harmonic(spec, rng, length, sample_rate);
      break;
    case GeneratorKind::kBandpassNoise:
      x = BandNoise(rng, length, sample_rate,
                    rng.Uniform(spec.primary.lo, spec.primary.hi),
                    rng.Uniform(spec.secondary.lo, spec.secondary.hi));
      break;
    case GeneratorKind::kAmNoise:
      x = AmNoise(spec, rng, length, sample_rate);
      break;
    case GeneratorKind::kChirp:
      x = Chirp(spec, rng, length, sample_rate);
      break;
    case GeneratorKind::kClickTrain:
      x = Clicks(spec, rng, length, sample_rate);
      break;
  }
  Fade(x, static_cast<std::size_t>(0.01 * sample_rate));
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  dsp::Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(length);
  const double gain = peak > 0.0 ? 0.5 / peak : 0.0;
  for (std::size_t i = 0; i < length; ++i) {
    w.samples[i] = static_cast<float>(x[i] * gain);
  }
  return w;
}

std::size_t CorpusConfig::clip_length() const {
  return static_cast<std::size_t>(std::lround(clip_seconds * sample_rate));
}

int CorpusConfig::train_count() const {
  return static_cast<int>(std::lround(samples_per_class * train_fraction));
}

std::size_t CorpusManifest::clip_length() const {
  return static_cast<std::size_t>(std::lround(clip_seconds * sample_rate));
}

const ClassSpec& CorpusManifest::Class(int class_id) const {
  for (const ClassSpec& c : classes) {
    if (c.class_id == class_id) return c;
  }
  throw Error(Errc::kMissingClass,
              "class " + std::to_string(class_id) + " not in manifest");
}

std::vector<int> CorpusManifest::ClassIds() const {
  std::vector<int> ids;
  for (const ClassSpec& c : classes) ids.push_back(c.class_id);
  return ids;
}

std::vector<std::size_t> CorpusManifest::EntriesOf(int class_id) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].class_id == class_id) idx.push_back(i);
  }
  return idx;
}

CorpusManifest MakeManifest(const CorpusConfig& config) {
  ValidateClasses(config.classes);
  if (config.samples_per_class < 1 || config.sample_rate <= 0 ||
      config.clip_seconds <= 0) {
    throw Error(Errc::kInvalidArgument, "invalid corpus configuration");
  }
  CorpusManifest m;
  m.sample_rate = config.sample_rate;
  m.clip_seconds = config.clip_seconds;
  m.samples_per_class = config.samples_per_class;
  m.master_seed = config.master_seed;
  m.classes = config.classes;
  const int n_train = config.train_count();
  for (const ClassSpec& c : config.classes) {
    for (int i = 0; i < config.samples_per_class; ++i) {
      m.entries.push_back({c.class_id, i, EntryPath(c.class_id, i),
                           EntrySeed(config.master_seed, c.class_id, i),
                           i < n_train});
    }
  }
  ValidateManifest(m);
  return m;
}

void ValidateManifest(const CorpusManifest& m) {
  ValidateClasses(m.classes);
  std::set<std::pair<int, int>> keys;
  std::set<std::uint64_t> seeds;
  std::map<int, int> counts;
  for (const ClassSpec& c : m.classes) counts[c.class_id] = 0;
  for (const ManifestEntry& e : m.entries) {
    auto it = counts.find(e.class_id);
    if (it == counts.end()) {
      throw Error(Errc::kMissingClass, "entry references unknown class " +
                                           std::to_string(e.class_id));
    }
    ++it->second;
    if (!keys.insert({e.class_id, e.sample_index}).second) {
      throw Error(Errc::kInvalidArgument, "duplicate entry (" +
                                              std::to_string(e.class_id) +
                                              ", " +
                                              std::to_string(e.sample_index) +
                                              ")");
    }
    if (!seeds.insert(e.seed).second) {
      throw Error(Errc::kInvalidArgument, "duplicate generation seed");
    }
  }
  for (auto [id, n] : counts) {
    if (n != m.samples_per_class) {
      throw Error(Errc::kInvalidArgument,
                  "class " + std::to_string(id) + " has " + std::to_string(n) +
                      " entries, expected " +
                      std::to_string(m.samples_per_class));
    }
  }
}

CorpusManifest BuildCorpus(const CorpusConfig& config,
                           const std::filesystem::path& out_dir) {
  CorpusManifest m = MakeManifest(config);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "audio", ec);
  if (ec) {
    throw Error(Errc::kIo, "cannot create " + out_dir.string() + ": " +
                               ec.message());
  }
  for (const ManifestEntry& e : m.entries) {
    dsp::WriteWav(out_dir / e.path,
                  GenerateClassSample(m.Class(e.class_id), e.seed,
                                      m.sample_rate, m.clip_length()));
  }
  SaveManifest(m, out_dir / "manifest.json");
  return m;
}

void SaveManifest(const CorpusManifest& m, const std::filesystem::path& path) {
  Json j;
  j["sample_rate"] = m.sample_rate;
  j["clip_seconds"] = m.clip_seconds;
  j["samples_per_class"] = m.samples_per_class;
  j["master_seed"] = Hex(m.master_seed);
  j["config_hash"] = m.config_hash;
  j["classes"] = Json::array();
  for (const ClassSpec& c : m.classes) {
    j["classes"].push_back({{"class_id", c.class_id},
                            {"name", c.name},
                            {"kind", KindName(c.kind)},
                            {"split", SplitName(c.split)},
                            {"primary", RangeJson(c.primary)},
                            {"secondary", RangeJson(c.secondary)}});
  }
  j["entries"] = Json::array();
  for (const ManifestEntry& e : m.entries) {
    j["entries"].push_back({{"class_id", e.class_id},
                            {"sample_index", e.sample_index},
                            {"path", e.path},
                            {"seed", Hex(e.seed)},
                            {"role", e.train ? "train" : "test"}});
  }
  std::ofstream os(path);
  os << j.dump(1) << '\n';
  if (!os) throw Error(Errc::kIo, "cannot write " + path.string());
}

CorpusManifest LoadManifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::kIo, "cannot open manifest " + path.string());
  CorpusManifest m;
  try {
    const Json j = Json::parse(is);
    m.sample_rate = j.at("sample_rate").get<int>();
    m.clip_seconds = j.at("clip_seconds").get<double>();
    m.samples_per_class = j.at("samples_per_class").get<int>();
    m.master_seed = ParseHex(j.at("master_seed").get<std::string>());
    m.config_hash = j.value("config_hash", std::string());
    for (const Json& c : j.at("classes")) {
      m.classes.push_back({c.at("class_id").get<int>(),
                           c.at("name").get<std::string>(),
                           ParseKind(c.at("kind").get<std::string>()),
                           ParseSplit(c.at("split").get<std::string>()),
                           ParseRange(c.at("primary")),
                           ParseRange(c.at("secondary"))});
    }
    for (const Json& e : j.at("entries")) {
      m.entries.push_back({e.at("class_id").get<int>(),
                           e.at("sample_index").get<int>(),
                           e.at("path").get<std::string>(),
                           ParseHex(e.at("seed").get<std::string>()),
                           e.at("role").get<std::string>() == "train"});
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::kCorruptFile,
                "malformed manifest " + path.string() + ": " + e.what());
  }
  ValidateManifest(m);
  return m;
}

CorpusManifest SelectSplit(const CorpusManifest& m, Split split) {
  std::vector<ManifestEntry> keep;
  for (const ManifestEntry& e : m.entries) {
    if (m.Class(e.class_id).split == split) keep.push_back(e);
  }
  return Subset(m, keep);
}

CorpusManifest TrainPart(const CorpusManifest& m) {
  std::vector<ManifestEntry> keep;
  for (const ManifestEntry& e : m.entries) {
    if (e.train) keep.push_back(e);
  }
  return Subset(m, keep);
}

CorpusManifest TestPart(const CorpusManifest& m) {
  std::vector<ManifestEntry> keep;
  for (const ManifestEntry& e : m.entries) {
    if (!e.train) keep.push_back(e);
  }
  return Subset(m, keep);
}

CorpusManifest SampleFewShot(const CorpusManifest& m, int shots,
                             std::uint64_t seed) {
  std::vector<ManifestEntry> keep;
  const Rng root = Rng(seed).Child("fewshot");
  for (const ClassSpec& c : m.classes) {
    std::vector<std::size_t> pool;
    for (std::size_t i : m.EntriesOf(c.class_id)) {
      if (m.entries[i].train) pool.push_back(i);
    }
    if (shots < 1 || static_cast<std::size_t>(shots) > pool.size()) {
      throw Error(Errc::kShotsTooLarge,
                  std::to_string(shots) + " shots requested but class " +
                      std::to_string(c.class_id) + " has " +
                      std::to_string(pool.size()) + " train samples");
    }
    Rng rng = root.Child(static_cast<std::uint64_t>(c.class_id));
    std::vector<std::size_t> perm = rng.Permutation(pool.size());
    perm.resize(static_cast<std::size_t>(shots));
    std::sort(perm.begin(), perm.end());
    for (std::size_t p : perm) keep.push_back(m.entries[pool[p]]);
  }
  return Subset(m, keep);
}

SourceSet SourceSet::Synthesize(const CorpusManifest& m) {
  SourceSet s;
  for (const ManifestEntry& e : m.entries) {
    dsp::Waveform w = GenerateClassSample(m.Class(e.class_id), e.seed,
                                          m.sample_rate, m.clip_length());
    for (float& v : w.samples) v = dsp::QuantizePcm16(v);
    s.Put(e.class_id, e.sample_index, std::move(w));
  }
  return s;
}

SourceSet SourceSet::Load(const CorpusManifest& m,
                          const std::filesystem::path& root) {
  SourceSet s;
  for (const ManifestEntry& e : m.entries) {
    dsp::Waveform w = dsp::ReadWav(root / e.path);
    if (w.size() != m.clip_length() || w.sample_rate != m.sample_rate) {
      throw Error(Errc::kLengthMismatch,
                  e.path + " does not match the manifest clip format");
    }
    s.Put(e.class_id, e.sample_index, std::move(w));
  }
  return s;
}

const dsp::Waveform& SourceSet::Get(int class_id, int sample_index) const {
  auto it = audio_.find({class_id, sample_index});
  if (it == audio_.end()) {
    throw Error(Errc::kMissingClass, "no audio for (" +
                                         std::to_string(class_id) + ", " +
                                         std::to_string(sample_index) + ")");
  }
  return it->second;
}

void SourceSet::Put(int class_id, int sample_index, dsp::Waveform w) {
  audio_[{class_id, sample_index}] = std::move(w);
}

dsp::Waveform Crop(const dsp::Waveform& x, std::size_t offset,
                   std::size_t length) {
  if (offset + length > x.size()) {
    throw Error(Errc::kInvalidArgument, "crop exceeds waveform");
  }
  dsp::Waveform out;
  out.sample_rate = x.sample_rate;
  out.samples.assign(x.samples.begin() + offset,
                     x.samples.begin() + offset + length);
  return out;
}

MixtureExample Mix(const dsp::Waveform& target, const dsp::Waveform& interferer,
                   std::size_t target_offset, std::size_t interferer_offset,
                   std::size_t crop_len) {
  MixtureExample ex;
  ex.target = Crop(target, target_offset, crop_len);
  const dsp::Waveform other = Crop(interferer, interferer_offset, crop_len);
  ex.mixture = ex.target;
  for (std::size_t i = 0; i < crop_len; ++i) {
    ex.mixture.samples[i] += other.samples[i];
  }
  ex.target_offset = target_offset;
  ex.interferer_offset = interferer_offset;
  return ex;
}

std::vector<MixtureExample> PairAndMix(const CorpusManifest& m,
                                       const SourceSet& sources,
                                       std::size_t crop_len,
                                       std::uint64_t seed, std::size_t count) {
  RequireTwoClasses(m);
  const Rng root = Rng(seed).Child("pair");
  std::vector<MixtureExample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = root.Child(static_cast<std::uint64_t>(i));
    const std::size_t entry = rng.Below(m.entries.size());
    out.push_back(DrawForEntry(m, sources, crop_len, entry, rng));
  }
  return out;
}

MixtureExample DrawMixture(const CorpusManifest& m, const SourceSet& sources,
                           std::size_t crop_len, int target_class,
                           std::uint64_t stream_key) {
  RequireTwoClasses(m);
  const std::vector<std::size_t> pool = m.EntriesOf(target_class);
  if (pool.empty()) {
    throw Error(Errc::kMissingClass, "class " + std::to_string(target_class) +
                                         " has no entries");
  }
  Rng rng(stream_key);
  const std::size_t entry = pool[rng.Below(pool.size())];
  return DrawForEntry(m, sources, crop_len, entry, rng);
}

MixtureExample DrawMixtureFor(const CorpusManifest& m,
                              const SourceSet& sources, std::size_t crop_len,
                              std::size_t entry, std::uint64_t stream_key) {
  RequireTwoClasses(m);
  if (entry >= m.entries.size()) {
    throw Error(Errc::kInvalidArgument, "entry index out of range");
  }
  Rng rng(stream_key);
  return DrawForEntry(m, sources, crop_len, entry, rng);
}

std::vector<MixtureExample> FixedTestMixtures(const CorpusManifest& m,
                                              const SourceSet& sources,
                                              std::size_t crop_len,
                                              std::uint64_t seed) {
  RequireTwoClasses(m);
  const Rng root = Rng(seed).Child("test-pairing");
  std::vector<MixtureExample> out;
  out.reserve(m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const ManifestEntry& e = m.entries[i];
    Rng rng = root.Child((static_cast<std::uint64_t>(e.class_id) << 32) |
                         static_cast<std::uint32_t>(e.sample_index));
    out.push_back(DrawForEntry(m, sources, crop_len, i, rng));
  }
  return out;
}

}  // namespace aptsep::corpus
