// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_CORPUS_CORPUS_H_
#define APTSEP_CORPUS_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "aptsep/dsp/waveform.h"

namespace aptsep::corpus {

enum class GeneratorKind {
  kHarmonicTone,
  kBandpassNoise,
  kAmNoise,
  kChirp,
  kClickTrain,
};

enum class Split { kSeen, kUnseen };

const char* KindName(GeneratorKind kind);
GeneratorKind ParseKind(const std::string& name);
const char* SplitName(Split split);
Split ParseSplit(const std::string& name);

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool Overlaps(const Range& o) const { return lo <= o.hi && o.lo <= hi; }
};

// Parameter meaning by kind:
//   harmonic-tone   primary = f0 (Hz)             secondary = vibrato rate (Hz)
//   bandpass-noise  primary = centre (Hz)         secondary = bandwidth (Hz)
//   am-noise        primary = carrier centre (Hz) secondary = AM rate (Hz)
//   chirp           primary = start (Hz)          secondary = end (Hz)
//   click-train     primary = click rate (Hz)     secondary = resonance (Hz)
struct ClassSpec {
  int class_id = 0;
  std::string name;
  GeneratorKind kind = GeneratorKind::kHarmonicTone;
  Split split = Split::kSeen;
  Range primary;
  Range secondary;
};

// 8 seen + 6 unseen classes with disjoint primary ranges per kind.
std::vector<ClassSpec> DefaultClasses();

// Throws kDuplicateClass, kInvalidArgument (bad ranges) or
// kInvalidArgument when two same-kind classes overlap.
void ValidateClasses(const std::vector<ClassSpec>& classes);

// Peak-normalized to 0.5.
dsp::Waveform GenerateClassSample(const ClassSpec& spec, std::uint64_t seed,
                                  int sample_rate, std::size_t length);

struct CorpusConfig {
  int sample_rate = 8000;
  double clip_seconds = 1.0;
  int samples_per_class = 24;
  double train_fraction = 0.6;
  std::uint64_t master_seed = 20260101;
  std::vector<ClassSpec> classes = DefaultClasses();

  std::size_t clip_length() const;
  int train_count() const;
};

struct ManifestEntry {
  int class_id = 0;
  int sample_index = 0;
  std::string path;  // relative to the manifest directory
  std::uint64_t seed = 0;
  bool train = true;
};

struct CorpusManifest {
  int sample_rate = 8000;
  double clip_seconds = 1.0;
  int samples_per_class = 0;
  std::uint64_t master_seed = 0;
  std::string config_hash;  // producing experiment config, may be empty
  std::vector<ClassSpec> classes;
  std::vector<ManifestEntry> entries;

  std::size_t clip_length() const;
  const ClassSpec& Class(int class_id) const;
  std::vector<int> ClassIds() const;
  // Entry indices of one class, in manifest order.
  std::vector<std::size_t> EntriesOf(int class_id) const;
};

CorpusManifest MakeManifest(const CorpusConfig& config);
// Checks every class has the same entry count, (k, i) and seed uniqueness.
void ValidateManifest(const CorpusManifest& manifest);

// Writes audio/ WAVs and manifest.json under out_dir.
CorpusManifest BuildCorpus(const CorpusConfig& config,
                           const std::filesystem::path& out_dir);
void SaveManifest(const CorpusManifest& manifest,
                  const std::filesystem::path& path);
CorpusManifest LoadManifest(const std::filesystem::path& path);

// Sub-manifests. Classes without entries are dropped.
CorpusManifest SelectSplit(const CorpusManifest& manifest, Split split);
CorpusManifest TrainPart(const CorpusManifest& manifest);
CorpusManifest TestPart(const CorpusManifest& manifest);

// Per class, the first `shots` train entries of a seeded permutation, so
// results for a fixed seed are nested in `shots`.
CorpusManifest SampleFewShot(const CorpusManifest& manifest, int shots,
                             std::uint64_t seed);

// Audio for manifest entries keyed by (class_id, sample_index).
class SourceSet {
 public:
  using Key = std::pair<int, int>;

  // Regenerates audio in memory, quantized exactly as the WAV files.
  static SourceSet Synthesize(const CorpusManifest& manifest);
  static SourceSet Load(const CorpusManifest& manifest,
                        const std::filesystem::path& root);

  const dsp::Waveform& Get(int class_id, int sample_index) const;
  const dsp::Waveform& Get(const ManifestEntry& e) const {
    return Get(e.class_id, e.sample_index);
  }
  void Put(int class_id, int sample_index, dsp::Waveform w);
  std::size_t size() const { return audio_.size(); }

 private:
  std::map<Key, dsp::Waveform> audio_;
};

struct MixtureExample {
  dsp::Waveform mixture;
  dsp::Waveform target;
  int target_class = 0;
  int interferer_class = 0;
  int target_sample = 0;
  int interferer_sample = 0;
  std::size_t target_offset = 0;
  std::size_t interferer_offset = 0;
};

dsp::Waveform Crop(const dsp::Waveform& x, std::size_t offset,
                   std::size_t length);

MixtureExample Mix(const dsp::Waveform& target, const dsp::Waveform& interferer,
                   std::size_t target_offset, std::size_t interferer_offset,
                   std::size_t crop_len);

// Example i draws target entry, a different interferer class, an entry of
// it and both crop offsets from its own child stream of `seed`.
std::vector<MixtureExample> PairAndMix(const CorpusManifest& manifest,
                                       const SourceSet& sources,
                                       std::size_t crop_len,
                                       std::uint64_t seed, std::size_t count);

// Draw used by PairAndMix and the tuning loops: target fixed to an entry of
// `target_class`, chosen with `stream`.
MixtureExample DrawMixture(const CorpusManifest& manifest,
                           const SourceSet& sources, std::size_t crop_len,
                           int target_class, std::uint64_t stream_key);

// Same draw with the target fixed to manifest entry `entry`.
MixtureExample DrawMixtureFor(const CorpusManifest& manifest,
                              const SourceSet& sources, std::size_t crop_len,
                              std::size_t entry, std::uint64_t stream_key);

// One seeded interferer per target entry, in manifest order.
std::vector<MixtureExample> FixedTestMixtures(const CorpusManifest& manifest,
                                              const SourceSet& sources,
                                              std::size_t crop_len,
                                              std::uint64_t seed);

}  // namespace aptsep::corpus

#endif  // APTSEP_CORPUS_CORPUS_H_
