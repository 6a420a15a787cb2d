// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include "aptsep/apt/apt.h"
#include "aptsep/common/error.h"
#include "aptsep/common/hash.h"
#include "aptsep/common/rng.h"
#include "aptsep/corpus/corpus.h"
#include "aptsep/grad/gradcheck.h"
#include "aptsep/models/checkpoint.h"
#include "aptsep/models/models.h"
#include "doctest.h"

using aptsep::Errc;
using aptsep::Error;
using namespace aptsep;
using namespace aptsep::apt;

namespace fs = std::filesystem;

namespace {

struct Fixture {
  corpus::CorpusManifest unseen;
  corpus::SourceSet sources;
  corpus::CorpusManifest train;
  models::Checkpoint sed;
  models::Checkpoint uss;

  Fixture() {
    const corpus::CorpusManifest m = corpus::MakeManifest(corpus::CorpusConfig{});
    unseen = corpus::SelectSplit(m, corpus::Split::kUnseen);
    sources = corpus::SourceSet::Synthesize(unseen);
    train = corpus::TrainPart(unseen);
    models::SedConfig sc;
    sc.class_ids = corpus::SelectSplit(m, corpus::Split::kSeen).ClassIds();
    sed = models::InitSed(sc, {}, 1);
    uss = models::InitUss({}, {}, 2);
  }

  PromptBank Initial() {
    models::SedModel model(sed);
    return InitPrompts(model, train, sources);
  }
};

Fixture& Shared() {
  static Fixture f;
  return f;
}

TuneConfig Short(int epochs, int steps) {
  TuneConfig c;
  c.epochs = epochs;
  c.steps_per_epoch = steps;
  c.seed = 17;
  c.learning_rate = 1e-2;
  return c;
}

bool SameBits(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("trainable count is K x D, desk and paper configurations") {
  CHECK(CountTrainable(6, 64) == 384);
  CHECK(CountTrainable(4, 2048) == 8192);
  CHECK(CountTrainable(50, 2048) == 102400);
  CHECK(CountTrainable(Shared().Initial()) == 384);
}

TEST_CASE("stage 1: 1-shot prompt is the embedding bitwise, N-shot is the mean") {
  Fixture& f = Shared();
  models::SedModel sed(f.sed);
  const corpus::CorpusManifest one = corpus::SampleFewShot(f.unseen, 1, 4);
  const PromptBank b1 = InitPrompts(sed, one, f.sources);
  CHECK(b1.shots == 1);
  for (const corpus::ManifestEntry& e : one.entries) {
    const std::vector<float> emb = sed.Embed(f.sources.Get(e));
    CHECK(SameBits(b1.Row(e.class_id), emb));
  }
  const PromptBank full = f.Initial();
  CHECK(full.shots == 14);
  CHECK(full.provenance == Provenance::kInitial);
  std::map<int, std::vector<long double>> sum;
  for (const corpus::ManifestEntry& e : f.train.entries) {
    const std::vector<float> emb = sed.Embed(f.sources.Get(e));
    auto& s = sum[e.class_id];
    s.resize(emb.size(), 0.0L);
    for (std::size_t i = 0; i < emb.size(); ++i) s[i] += emb[i];
  }
  for (const auto& [k, s] : sum) {
    std::span<const float> row = full.Row(k);
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(std::abs(static_cast<double>(row[i] - s[i] / 14.0L)) < 1e-6);
    }
  }
  try {
    InitFromEmbeddings({{3, {}}});
    FAIL("empty class accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kEmptyClass);
  }
}

TEST_CASE("prompt bank file round-trips bitwise and rejects corruption") {
  PromptBank b = Shared().Initial();
  b.provenance = Provenance::kTuned;
  b.seed = 0xDEADBEEFCAFEF00DULL;
  b.config_hash = "hash";
  const fs::path dir = fs::temp_directory_path() / "aptsep_apt_bank";
  fs::create_directories(dir);
  SavePromptBank(b, dir / "b.json");
  const PromptBank back = LoadPromptBank(dir / "b.json");
  CHECK(back.class_ids == b.class_ids);
  CHECK(back.dim == b.dim);
  CHECK(SameBits(back.prompts, b.prompts));
  CHECK(back.provenance == Provenance::kTuned);
  CHECK(back.shots == b.shots);
  CHECK(back.seed == b.seed);
  CHECK(back.config_hash == "hash");
  std::ifstream is(dir / "b.json");
  std::string text((std::istreambuf_iterator<char>(is)), {});
  const std::size_t at = text.find("\"data\"");
  REQUIRE(at != std::string::npos);
  const std::size_t q = text.find('"', text.find(':', at) + 1);
  text[q + 5] = '*';
  std::ofstream(dir / "bad.json") << text;
  try {
    LoadPromptBank(dir / "bad.json");
    FAIL("corrupt payload accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kCorruptFile);
  }
  PromptBank dup = b;
  dup.class_ids[1] = dup.class_ids[0];
  CHECK_THROWS_AS(ValidateBank(dup), Error);
  fs::remove_all(dir);
}

TEST_CASE("tuning: zero epochs is a no-op, frozen separator, K x D optimizer state") {
  Fixture& f = Shared();
  const PromptBank init = f.Initial();
  models::UssModel uss(f.uss);
  TuneStats zero_stats;
  const PromptBank same = TunePrompts(uss, init, f.train, f.sources, Short(0, 6), &zero_stats);
  CHECK(SameBits(same.prompts, init.prompts));
  CHECK(same.provenance == Provenance::kTuned);
  CHECK(zero_stats.steps == 0);

  const fs::path dir = fs::temp_directory_path() / "aptsep_apt_freeze";
  fs::create_directories(dir);
  models::SaveCheckpoint(f.uss, dir / "uss.ckpt");
  const std::string before = Sha256File(dir / "uss.ckpt");
  models::UssModel loaded(models::LoadCheckpoint(dir / "uss.ckpt"));
  TuneStats stats;
  const PromptBank tuned = TunePrompts(loaded, init, f.train, f.sources, Short(2, 6), &stats);
  CHECK(Sha256File(dir / "uss.ckpt") == before);
  CHECK(loaded.checkpoint() == f.uss);
  CHECK(stats.optimizer_state == 384);
  CHECK(stats.steps == 12);
  CHECK(stats.epoch_loss.size() == 2);
  CHECK_FALSE(SameBits(tuned.prompts, init.prompts));
  fs::remove_all(dir);
}

TEST_CASE("tuning is deterministic and rows are independent across class subsets") {
  Fixture& f = Shared();
  const PromptBank init = f.Initial();
  TuneConfig all = Short(2, 6);
  TuneConfig s = all;
  s.classes = {8, 9};
  models::UssModel uss(f.uss);
  const PromptBank a = TunePrompts(uss, init, f.train, f.sources, all);
  const PromptBank b = TunePrompts(uss, init, f.train, f.sources, all);
  CHECK(SameBits(a.prompts, b.prompts));
  const PromptBank only = TunePrompts(uss, init, f.train, f.sources, s);
  for (int k : {8, 9}) CHECK(SameBits(only.Row(k), a.Row(k)));
  for (int k : {10, 11, 12, 13}) CHECK(SameBits(only.Row(k), init.Row(k)));
  TuneConfig rest = s;
  rest.classes = {10, 11};
  const PromptBank other = TunePrompts(uss, init, f.train, f.sources, rest);
  for (int k : {10, 11}) CHECK(SameBits(other.Row(k), a.Row(k)));
}

TEST_CASE("tuning errors: missing training class, non-initial bank") {
  Fixture& f = Shared();
  PromptBank init = f.Initial();
  models::UssModel uss(f.uss);
  corpus::CorpusManifest partial = f.train;
  std::erase_if(partial.entries, [](const corpus::ManifestEntry& e) { return e.class_id == 13; });
  std::erase_if(partial.classes, [](const corpus::ClassSpec& c) { return c.class_id == 13; });
  try {
    TunePrompts(uss, init, partial, f.sources, Short(1, 6));
    FAIL("missing class accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kMissingClass);
  }
  init.provenance = Provenance::kTuned;
  try {
    TunePrompts(uss, init, f.train, f.sources, Short(1, 6));
    FAIL("tuned bank accepted as a start point");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kInvalidArgument);
  }
}

TEST_CASE("joint fine-tuning moves the separator but never its input checkpoint") {
  Fixture& f = Shared();
  const PromptBank init = f.Initial();
  const models::Checkpoint copy = f.uss;
  const JointResult r = JointFinetune(f.uss, init, f.train, f.sources, Short(1, 6));
  CHECK(f.uss == copy);
  CHECK_FALSE(r.uss == f.uss);
  CHECK(r.bank.provenance == Provenance::kJointTuned);
  CHECK(r.stats.optimizer_state == f.uss.ParameterCount() + 384);
  for (const models::NamedTensor& t : r.uss.tensors) CHECK(t.frozen);
}

TEST_CASE("random-init diagnostic is seeded and sized K x D") {
  const PromptBank a = RandomPrompts({8, 9, 10}, 64, 3, 2.0);
  const PromptBank b = RandomPrompts({8, 9, 10}, 64, 3, 2.0);
  CHECK(a.prompts.size() == 192);
  CHECK(SameBits(a.prompts, b.prompts));
  CHECK(a.init == "random");
  CHECK_FALSE(SameBits(a.prompts, RandomPrompts({8, 9, 10}, 64, 4, 2.0).prompts));
}

TEST_CASE("full separator loss gradient w.r.t. a random prompt matches central differences") {
  Fixture& f = Shared();
  for (std::uint64_t trial = 0; trial < 2; ++trial) {
    const corpus::MixtureExample ex = corpus::DrawMixture(
        f.train, f.sources, 8000, 8 + static_cast<int>(trial), Rng(trial).key());
    PromptLossProbe probe(f.uss, ex);
    Rng r(50 + trial);
    grad::Tensor<double> p({64});
    for (double& v : p.data()) v = 5.0 * r.Normal();
    const grad::DifferentiableFn<double> fn = [&](const grad::Tensor<double>& x) {
      grad::ValueAndGrad<double> out;
      out.value = probe.LossAndGrad(x.data(), &out.grad);
      return out;
    };
    CHECK(grad::FiniteDifferenceCheck<double>(fn, p, 1e-5) < 1e-4);

    models::UssModel uss(f.uss);
    std::vector<float> pf(p.data().begin(), p.data().end());
    const grad::Tensor<float> prompt({1, 64}, pf);
    const float lf = uss.Forward(models::PrepareUssInput(ex.mixture, uss.audio()), prompt,
                                 grad::Tensor<float>({8000}, ex.target.samples));
    std::vector<double> pd(p.data().begin(), p.data().end());
    CHECK(probe.Loss(pd) == doctest::Approx(lf).epsilon(1e-4));
  }
}

TEST_CASE("symmetric embeddings cancel; joint tuning with zero epochs is a no-op") {
  std::vector<float> e = {0.5f, -1.25f, 3.0f, 1e-3f};
  std::vector<float> neg = e;
  for (float& v : neg) v = -v;
  const PromptBank z = InitFromEmbeddings({{4, {e, neg}}, {7, {e}}});
  for (float v : z.Row(4)) CHECK(v == 0.0f);
  CHECK(SameBits(z.Row(7), e));

  Fixture& f = Shared();
  const PromptBank init = f.Initial();
  const JointResult r = JointFinetune(f.uss, init, f.train, f.sources, Short(0, 6));
  CHECK(SameBits(r.bank.prompts, init.prompts));
  for (std::size_t i = 0; i < f.uss.tensors.size(); ++i) {
    CHECK(SameBits(r.uss.tensors[i].value.data(), f.uss.tensors[i].value.data()));
  }
}
