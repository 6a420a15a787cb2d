// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Properties that only hold for trained models. Runs the default desk
// pretraining, so it takes minutes.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aptsep/apt/apt.h"
#include "aptsep/common/rng.h"
#include "aptsep/corpus/corpus.h"
#include "aptsep/eval/eval.h"
#include "aptsep/models/pretrain.h"
#include "doctest.h"

using namespace aptsep;

namespace {

struct Data {
  corpus::CorpusManifest seen_train, seen_test, unseen_train;
  corpus::SourceSet sources;

  Data() {
    const corpus::CorpusManifest m = corpus::MakeManifest(corpus::CorpusConfig{});
    const corpus::CorpusManifest seen = corpus::SelectSplit(m, corpus::Split::kSeen);
    seen_train = corpus::TrainPart(seen);
    seen_test = corpus::TestPart(seen);
    unseen_train = corpus::TrainPart(corpus::SelectSplit(m, corpus::Split::kUnseen));
    sources = corpus::SourceSet::Synthesize(m);
  }
};

Data& Shared() {
  static Data d;
  return d;
}

models::PretrainConfig Config(std::uint64_t seed) {
  models::PretrainConfig c;
  c.seed = seed;
  return c;
}

// Seed 0 backbone, trained once.
const models::PretrainResult& Backbone() {
  static const models::PretrainResult r =
      models::PretrainBackbone(Shared().seen_train, Shared().sources, Config(0));
  return r;
}

double Cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// Expected training loss of a bank, estimated on one fixed seeded sample of
// training mixtures (shots x 4 per class) so successive banks are compared on
// identical draws.
double ExpectedTrainLoss(models::UssModel& uss, const apt::PromptBank& bank,
                         const corpus::CorpusManifest& train,
                         const corpus::SourceSet& sources, std::uint64_t seed) {
  const std::size_t clip = uss.audio().clip_length;
  const Rng root = Rng(seed).Child("expected-loss");
  double total = 0.0;
  std::size_t n = 0;
  for (int k : bank.class_ids) {
    const std::size_t draws = 4 * static_cast<std::size_t>(std::count_if(
        train.entries.begin(), train.entries.end(),
        [&](const corpus::ManifestEntry& e) { return e.class_id == k; }));
    for (std::size_t i = 0; i < draws; ++i) {
      const corpus::MixtureExample ex = corpus::DrawMixture(
          train, sources, clip, k, root.Child(static_cast<std::uint64_t>(k)).Child(i).key());
      const std::span<const float> row = bank.Row(k);
      const grad::Tensor<float> prompt({1, row.size()}, {row.begin(), row.end()});
      total += uss.Forward(models::PrepareUssInput(ex.mixture, uss.audio()), prompt,
                           grad::Tensor<float>({clip}, ex.target.samples));
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST_CASE("sed: held-out accuracy over 3 seeds, embedding clusters") {
  Data& d = Shared();
  std::vector<double> acc;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const models::Checkpoint ckpt =
        seed == 0 ? Backbone().sed : models::TrainSed(d.seen_train, d.sources, Config(seed), nullptr);
    models::SedModel sed(ckpt);
    acc.push_back(models::SedAccuracy(sed, d.seen_test, d.sources));

    std::vector<std::pair<int, std::vector<float>>> emb;
    for (const corpus::ManifestEntry& e : d.seen_test.entries) {
      emb.push_back({e.class_id, sed.Embed(d.sources.Get(e))});
    }
    double within = 0, between = 0;
    long nw = 0, nb = 0;
    for (std::size_t i = 0; i < emb.size(); ++i) {
      for (std::size_t j = i + 1; j < emb.size(); ++j) {
        const double c = Cosine(emb[i].second, emb[j].second);
        if (emb[i].first == emb[j].first) {
          within += c;
          ++nw;
        } else {
          between += c;
          ++nb;
        }
      }
    }
    MESSAGE("seed " << seed << " accuracy " << acc.back() << " within " << within / nw
                    << " between " << between / nb);
    CHECK(within / nw > between / nb);
  }
  CHECK(eval::Median(acc) >= 0.9);
}

TEST_CASE("separator: seen-class SDR and conditioning effectiveness") {
  Data& d = Shared();
  models::SedModel sed(Backbone().sed);
  const apt::PromptBank bank = apt::InitPrompts(sed, d.seen_train, d.sources);
  models::UssModel uss(Backbone().uss);
  const auto test = corpus::FixedTestMixtures(d.seen_test, d.sources, uss.audio().clip_length, 0);
  double sum = 0, sum_mix = 0;
  int wins = 0;
  for (const corpus::MixtureExample& ex : test) {
    const dsp::Waveform own = uss.Separate(ex.mixture, bank.Row(ex.target_class));
    const dsp::Waveform other = uss.Separate(ex.mixture, bank.Row(ex.interferer_class));
    double dist = 0;
    for (std::size_t i = 0; i < own.samples.size(); ++i) {
      dist += std::pow(static_cast<double>(own.samples[i]) - other.samples[i], 2);
    }
    const double s_own = eval::Sdr(ex.target, own);
    CHECK(dist > 0);
    wins += s_own > eval::Sdr(ex.target, other);
    sum += s_own;
    sum_mix += eval::Sdr(ex.target, ex.mixture);
  }
  const double n = static_cast<double>(test.size());
  MESSAGE("mean sdr " << sum / n << " mixture " << sum_mix / n << " matching wins "
                      << wins << "/" << test.size());
  CHECK(sum / n >= 5.0);
  CHECK(sum / n > sum_mix / n);
  CHECK(wins >= 0.8 * n);
}

TEST_CASE("prompt tuning: expected training loss non-increasing over 5 epochs in 2 of 3 seeds") {
  Data& d = Shared();
  models::SedModel sed(Backbone().sed);
  const apt::PromptBank bank = apt::InitPrompts(sed, d.unseen_train, d.sources);
  models::UssModel uss(Backbone().uss);
  int monotone = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    apt::TuneConfig cfg;
    cfg.seed = seed;
    apt::TuneStats full;
    std::vector<double> expected(5);
    for (int e = 5; e >= 1; --e) {
      cfg.epochs = e;
      apt::TuneStats stats;
      const apt::PromptBank tuned =
          apt::TunePrompts(uss, bank, d.unseen_train, d.sources, cfg, &stats);
      if (e == 5) full = stats;
      // A shorter run is a prefix of the longer one.
      CHECK(std::equal(stats.epoch_loss.begin(), stats.epoch_loss.end(),
                       full.epoch_loss.begin()));
      expected[e - 1] = ExpectedTrainLoss(uss, tuned, d.unseen_train, d.sources, 100 + seed);
    }
    std::ostringstream msg;
    msg << "seed " << seed << " expected loss";
    for (double l : expected) msg << " " << l;
    msg << "; epoch means";
    for (double l : full.epoch_loss) msg << " " << l;
    MESSAGE(msg.str());
    monotone += std::is_sorted(expected.rbegin(), expected.rend());
  }
  CHECK(monotone >= 2);
}
