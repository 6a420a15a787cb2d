// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "aptsep/common/error.h"
#include "aptsep/common/rng.h"
#include "aptsep/corpus/corpus.h"
#include "aptsep/dsp/stft.h"
#include "doctest.h"

using aptsep::Errc;
using aptsep::Error;
using aptsep::Rng;
using namespace aptsep::corpus;

namespace fs = std::filesystem;

namespace {

fs::path TempDir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("aptsep_corpus_" + name);
  fs::remove_all(p);
  return p;
}

CorpusConfig SmallConfig(int n) {
  CorpusConfig c;
  c.samples_per_class = n;
  return c;
}

// Log energy in 16 bands of 250 Hz, from the mean power spectrum.
std::vector<double> BandEnergies(const aptsep::dsp::Waveform& w) {
  const auto s = aptsep::dsp::Stft(w, 256, 64);
  std::vector<double> bands(16, 1e-12);
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t k = 0; k < s.bins; ++k) {
      const double hz = k * 8000.0 / 256.0;
      const std::size_t b = std::min<std::size_t>(15, static_cast<std::size_t>(hz / 250.0));
      const double re = s.real[t * s.bins + k], im = s.imag[t * s.bins + k];
      bands[b] += re * re + im * im;
    }
  }
  for (double& v : bands) v = std::log(v);
  return bands;
}

}  // namespace

TEST_CASE("rng: first draw matches the splitmix64 reference output") {
  Rng r(0);
  CHECK(r.NextU64() == 0xE220A8397B1DCDAFULL);
  CHECK(r.NextU64() == 0x6E789E6AA1B965F4ULL);
  CHECK(r.NextU64() == 0x06C45D188009454FULL);
}

TEST_CASE("rng: uniform range, Below bounds, permutations, child streams") {
  Rng r(42);
  double mean = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.Uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    mean += u;
  }
  CHECK(mean / 20000 == doctest::Approx(0.5).epsilon(0.02));
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 7000; ++i) ++hist[r.Below(7)];
  for (int h : hist) CHECK(h > 800);
  std::vector<std::size_t> p = Rng(9).Permutation(50);
  std::vector<std::size_t> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 50; ++i) CHECK(sorted[i] == i);
  CHECK(Rng(5).Child("a").key() == Rng(5).Child("a").key());
  CHECK(Rng(5).Child("a").key() != Rng(5).Child("b").key());
  CHECK(Rng(5).Child(1).key() != Rng(6).Child(1).key());
}

TEST_CASE("default corpus: 14 classes, 336 entries, 14 train / 10 test per class") {
  const CorpusManifest m = MakeManifest(CorpusConfig{});
  CHECK(m.classes.size() == 14);
  CHECK(m.entries.size() == 336);
  CHECK_NOTHROW(ValidateManifest(m));
  CHECK(SelectSplit(m, Split::kSeen).classes.size() == 8);
  CHECK(SelectSplit(m, Split::kUnseen).classes.size() == 6);
  for (int k : m.ClassIds()) {
    int train = 0;
    for (std::size_t idx : m.EntriesOf(k)) {
      const ManifestEntry& e = m.entries[idx];
      CHECK(e.train == (e.sample_index < 14));
      train += e.train;
    }
    CHECK(train == 14);
  }
  std::set<std::uint64_t> seeds;
  for (const ManifestEntry& e : m.entries) seeds.insert(e.seed);
  CHECK(seeds.size() == m.entries.size());
}

TEST_CASE("N=1 corpus has exactly one entry per class") {
  const CorpusManifest m = MakeManifest(SmallConfig(1));
  CHECK(m.entries.size() == 14);
  for (int k : m.ClassIds()) CHECK(m.EntriesOf(k).size() == 1);
}

TEST_CASE("class validation: duplicates, bad ranges, overlapping same-kind classes") {
  std::vector<ClassSpec> c = DefaultClasses();
  CHECK_NOTHROW(ValidateClasses(c));
  c[1].class_id = c[0].class_id;
  CHECK_THROWS_AS(ValidateClasses(c), Error);
  try {
    ValidateClasses(c);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kDuplicateClass);
  }
  c = DefaultClasses();
  c[1].primary = c[0].primary;  // both harmonic
  try {
    ValidateClasses(c);
    FAIL("overlap accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kInvalidArgument);
  }
  c = DefaultClasses();
  c[0].primary = {300, 200};
  CHECK_THROWS_AS(ValidateClasses(c), Error);
}

TEST_CASE("generation is deterministic and peak-normalized for every kind") {
  for (const ClassSpec& spec : DefaultClasses()) {
    const auto a = GenerateClassSample(spec, 1234, 8000, 8000);
    const auto b = GenerateClassSample(spec, 1234, 8000, 8000);
    REQUIRE(a.size() == 8000);
    CHECK(a.samples == b.samples);
    float peak = 0;
    for (float v : a.samples) peak = std::max(peak, std::abs(v));
    CHECK(std::abs(peak - 0.5f) <= 1e-6f);
    CHECK(GenerateClassSample(spec, 1235, 8000, 8000).samples != a.samples);
  }
}

TEST_CASE("harmonic tone with f0 in [200, 300] Hz peaks inside that band") {
  ClassSpec spec{0, "probe", GeneratorKind::kHarmonicTone, Split::kSeen, {200, 300}, {3, 6}};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto w = GenerateClassSample(spec, seed, 8000, 8000);
    const auto s = aptsep::dsp::Stft(w, 256, 64);
    std::vector<double> power(s.bins, 0.0);
    for (std::size_t t = 0; t < s.frames; ++t) {
      for (std::size_t k = 0; k < s.bins; ++k) power[k] += s.Magnitude(t, k);
    }
    const std::size_t peak =
        std::max_element(power.begin(), power.end()) - power.begin();
    const double hz = peak * 8000.0 / 256.0;
    CHECK(hz >= 200.0 - 31.25);
    CHECK(hz <= 300.0 + 31.25);
  }
}

TEST_CASE("band-energy nearest-centroid classifier separates held-out samples") {
  const CorpusManifest m = MakeManifest(CorpusConfig{});
  const SourceSet src = SourceSet::Synthesize(m);
  std::map<int, std::vector<double>> centroid;
  std::map<int, int> count;
  for (const ManifestEntry& e : m.entries) {
    if (!e.train) continue;
    const auto f = BandEnergies(src.Get(e));
    auto& c = centroid[e.class_id];
    c.resize(f.size(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) c[i] += f[i];
    ++count[e.class_id];
  }
  for (auto& [k, c] : centroid) {
    for (double& v : c) v /= count[k];
  }
  int correct = 0, total = 0;
  for (const ManifestEntry& e : m.entries) {
    if (e.train) continue;
    const auto f = BandEnergies(src.Get(e));
    int best = -1;
    double best_d = 1e300;
    for (const auto& [k, c] : centroid) {
      double d = 0;
      for (std::size_t i = 0; i < f.size(); ++i) d += (f[i] - c[i]) * (f[i] - c[i]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    correct += best == e.class_id;
    ++total;
  }
  CHECK(total == 140);
  CHECK(static_cast<double>(correct) / total >= 0.95);
}

TEST_CASE("build_corpus writes identical files on rebuild and loads back") {
  const fs::path a = TempDir("a"), b = TempDir("b");
  const CorpusManifest ma = BuildCorpus(SmallConfig(2), a);
  const CorpusManifest mb = BuildCorpus(SmallConfig(2), b);
  REQUIRE(ma.entries.size() == 28);
  for (const ManifestEntry& e : ma.entries) {
    std::ifstream fa(a / e.path, std::ios::binary), fb(b / e.path, std::ios::binary);
    const std::string da((std::istreambuf_iterator<char>(fa)), {});
    const std::string db((std::istreambuf_iterator<char>(fb)), {});
    CHECK(!da.empty());
    CHECK(da == db);
  }
  const CorpusManifest loaded = LoadManifest(a / "manifest.json");
  REQUIRE(loaded.entries.size() == ma.entries.size());
  for (std::size_t i = 0; i < ma.entries.size(); ++i) {
    CHECK(loaded.entries[i].seed == ma.entries[i].seed);
    CHECK(loaded.entries[i].path == ma.entries[i].path);
    CHECK(loaded.entries[i].train == ma.entries[i].train);
  }
  const SourceSet from_files = SourceSet::Load(loaded, a);
  const SourceSet synth = SourceSet::Synthesize(ma);
  for (const ManifestEntry& e : ma.entries) {
    CHECK(from_files.Get(e).samples == synth.Get(e).samples);
  }
  std::ofstream(a / "manifest.json") << "{\"sample_rate\": 8000,";
  try {
    LoadManifest(a / "manifest.json");
    FAIL("corrupt manifest accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kCorruptFile);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("sample_fewshot: full prefix, nesting over 50 seeds, seed variety, errors") {
  const CorpusManifest m = SelectSplit(MakeManifest(CorpusConfig{}), Split::kUnseen);
  const CorpusManifest full = SampleFewShot(m, 14, 3);
  CHECK(full.entries.size() == TrainPart(m).entries.size());
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::map<int, std::set<int>> prev;
    for (int shots : {1, 5, 10, 14}) {
      const CorpusManifest s = SampleFewShot(m, shots, seed);
      std::map<int, std::set<int>> cur;
      for (const ManifestEntry& e : s.entries) {
        REQUIRE(e.train);
        cur[e.class_id].insert(e.sample_index);
      }
      for (const auto& [k, idx] : cur) {
        REQUIRE(idx.size() == static_cast<std::size_t>(shots));
        for (int i : prev[k]) REQUIRE(idx.count(i) == 1);
      }
      prev = cur;
    }
  }
  std::set<int> picks;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    picks.insert(SampleFewShot(m, 1, seed).entries.front().sample_index);
  }
  CHECK(picks.size() >= 2);
  try {
    SampleFewShot(m, 15, 0);
    FAIL("shots beyond the train split accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kShotsTooLarge);
  }
}

TEST_CASE("pair_and_mix: k != l, exact reconstruction, forced pairing, too few classes") {
  const CorpusManifest m = MakeManifest(CorpusConfig{});
  const SourceSet src = SourceSet::Synthesize(m);
  const auto mixes = PairAndMix(m, src, 4000, 77, 1000);
  REQUIRE(mixes.size() == 1000);
  for (const MixtureExample& ex : mixes) REQUIRE(ex.target_class != ex.interferer_class);
  for (std::size_t n = 0; n < 100; ++n) {
    const MixtureExample& ex = mixes[n];
    const auto t = Crop(src.Get(ex.target_class, ex.target_sample), ex.target_offset, 4000);
    const auto i = Crop(src.Get(ex.interferer_class, ex.interferer_sample),
                        ex.interferer_offset, 4000);
    REQUIRE(ex.mixture.size() == 4000);
    CHECK(ex.target.samples == t.samples);
    for (std::size_t j = 0; j < 4000; ++j) {
      REQUIRE(ex.mixture.samples[j] == t.samples[j] + i.samples[j]);
    }
  }
  std::set<std::size_t> offsets;
  for (const MixtureExample& ex : mixes) offsets.insert(ex.target_offset);
  CHECK(offsets.size() > 100);

  CorpusManifest two = m;
  std::erase_if(two.entries, [](const ManifestEntry& e) { return e.class_id > 1; });
  std::erase_if(two.classes, [](const ClassSpec& c) { return c.class_id > 1; });
  for (const MixtureExample& ex : PairAndMix(two, src, 8000, 1, 50)) {
    CHECK(ex.target_class + ex.interferer_class == 1);
  }
  CorpusManifest one = two;
  std::erase_if(one.entries, [](const ManifestEntry& e) { return e.class_id == 1; });
  std::erase_if(one.classes, [](const ClassSpec& c) { return c.class_id == 1; });
  try {
    PairAndMix(one, src, 8000, 1, 5);
    FAIL("single-class pairing accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kTooFewClasses);
  }
}

TEST_CASE("fixed test mixtures: one per target, deterministic, seed-dependent pairing") {
  const CorpusManifest m = TestPart(SelectSplit(MakeManifest(CorpusConfig{}), Split::kUnseen));
  const SourceSet src = SourceSet::Synthesize(m);
  const auto a = FixedTestMixtures(m, src, 8000, 5);
  const auto b = FixedTestMixtures(m, src, 8000, 5);
  const auto c = FixedTestMixtures(m, src, 8000, 6);
  REQUIRE(a.size() == 60);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].target_class == m.entries[i].class_id);
    CHECK(a[i].target_sample == m.entries[i].sample_index);
    CHECK(a[i].mixture.samples == b[i].mixture.samples);
    CHECK(a[i].target_class != a[i].interferer_class);
    differs = differs || a[i].interferer_sample != c[i].interferer_sample ||
              a[i].interferer_class != c[i].interferer_class;
  }
  CHECK(differs);
}
