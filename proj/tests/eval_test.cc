// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "aptsep/apt/apt.h"
#include "aptsep/common/error.h"
#include "aptsep/corpus/corpus.h"
#include "aptsep/eval/eval.h"
#include "aptsep/models/models.h"
#include "doctest.h"

using aptsep::Errc;
using aptsep::Error;
using namespace aptsep;
using namespace aptsep::eval;

namespace fs = std::filesystem;

namespace {

// Median by counting: the value with at most n/2 smaller and at most n/2
// larger elements; for even n the two middle order statistics are found by
// rank counting.
double CountingMedian(const std::vector<double>& v) {
  const std::size_t n = v.size();
  auto order_stat = [&](std::size_t rank) {
    for (double c : v) {
      std::size_t less = 0, equal = 0;
      for (double d : v) {
        less += d < c;
        equal += d == c;
      }
      if (less <= rank && rank < less + equal) return c;
    }
    return std::nan("");
  };
  if (n % 2 == 1) return order_stat(n / 2);
  return 0.5 * (order_stat(n / 2 - 1) + order_stat(n / 2));
}

apt::PromptBank Bank(std::vector<int> ids, std::size_t dim, float fill) {
  apt::PromptBank b;
  b.class_ids = std::move(ids);
  b.dim = dim;
  b.prompts.assign(b.class_ids.size() * dim, fill);
  return b;
}

}  // namespace

TEST_CASE("sdr: closed forms and length mismatch") {
  std::mt19937 gen(3);
  std::normal_distribution<float> nd;
  std::vector<float> s(4000);
  for (float& v : s) v = nd(gen);
  double energy = 0;
  for (float v : s) energy += static_cast<double>(v) * v;
  CHECK(Sdr(s, s) == doctest::Approx(10 * std::log10((energy + 1e-8) / 1e-8)));
  std::vector<float> zero(s.size(), 0.0f);
  CHECK(std::abs(Sdr(s, zero)) < 1e-9);
  for (float a : {0.5f, 0.25f, 0.1f, 1.5f}) {
    std::vector<float> est(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) est[i] = s[i] * (1.0f - a);
    CHECK(std::abs(Sdr(s, est) - (-20.0 * std::log10(a))) < 1e-3);
  }
  std::vector<float> est(s.size()), ns(s.size()), nest(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    est[i] = s[i] + 0.3f * nd(gen);
    ns[i] = -s[i];
    nest[i] = -est[i];
  }
  CHECK(Sdr(ns, nest) == Sdr(s, est));
  std::vector<float> shorter(s.begin(), s.end() - 1);
  try {
    Sdr(s, shorter);
    FAIL("length mismatch accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kLengthMismatch);
  }
}

TEST_CASE("median agrees with a counting oracle on 1000 random lists") {
  std::mt19937 gen(11);
  std::uniform_int_distribution<int> len(1, 40);
  std::uniform_int_distribution<int> small(-5, 5);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(len(gen));
    const bool ties = t % 3 == 0;
    for (double& x : v) x = ties ? small(gen) : nd(gen);
    REQUIRE(Median(v) == CountingMedian(v));
  }
  CHECK(Median({3.0}) == 3.0);
  CHECK(Median({1.0, 4.0}) == 2.5);
  try {
    Median({});
    FAIL("empty median accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kEmptyList);
  }
}

TEST_CASE("aggregate: per-class medians, overall median over clips, mean of medians") {
  const EvalReport r = Aggregate({2, 1, 2, 1, 2}, {5.0, 1.0, 7.0, 3.0, 6.0}, "apt");
  REQUIRE(r.classes.size() == 2);
  CHECK(r.classes[0].class_id == 1);
  CHECK(r.classes[0].median == 2.0);
  CHECK(r.classes[1].median == 6.0);
  CHECK(r.classes[1].sdrs == std::vector<double>{5.0, 7.0, 6.0});
  CHECK(r.overall_median == 5.0);
  CHECK(r.mean_class_median == 4.0);
  CHECK(r.clip_count() == 5);
}

TEST_CASE("baseline attachment, improved-class count and mismatch errors") {
  EvalReport a = Aggregate({1, 2, 3}, {4.0, 1.0, 2.0}, "apt");
  const EvalReport b = Aggregate({1, 2, 3}, {3.0, 1.5, 1.0}, "baseline-zero-shot");
  CHECK(ImprovedClasses(a, b) == 2);
  AttachBaseline(a, b);
  CHECK(*a.classes[1].baseline_median == 1.5);
  CHECK(*a.baseline_overall_median == 1.5);
  EvalReport c = Aggregate({1, 2}, {1.0, 2.0}, "apt");
  CHECK_THROWS_AS(AttachBaseline(c, b), Error);
}

TEST_CASE("report JSON round-trips exactly; CSV has class rows and two footers") {
  EvalReport r = Aggregate({8, 9, 8, 9}, {1.0 / 3.0, 2.0, 0.1, -7.25}, "apt");
  AttachBaseline(r, Aggregate({8, 9, 8, 9}, {0.2, 0.3, 0.4, 0.5}, "baseline-zero-shot"));
  r.shots = 5;
  r.seed = 0xFFFFFFFFFFFFFFF1ULL;
  r.config_hash = "abc";
  const fs::path dir = fs::temp_directory_path() / "aptsep_eval_report";
  fs::create_directories(dir);
  EmitReport(r, dir / "r.json", ReportFormat::kJson);
  const EvalReport back = LoadReportJson(dir / "r.json");
  CHECK(back.system == r.system);
  CHECK(back.shots == 5);
  CHECK(back.seed == r.seed);
  CHECK(back.config_hash == "abc");
  CHECK(back.overall_median == r.overall_median);
  CHECK(back.mean_class_median == r.mean_class_median);
  CHECK(*back.baseline_overall_median == *r.baseline_overall_median);
  REQUIRE(back.classes.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.classes[i].sdrs == r.classes[i].sdrs);
    CHECK(back.classes[i].median == r.classes[i].median);
    CHECK(*back.classes[i].baseline_median == *r.classes[i].baseline_median);
  }
  EmitReport(r, dir / "r.csv", ReportFormat::kCsv);
  std::ifstream is(dir / "r.csv");
  std::vector<std::string> lines;
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "class_id,n_test,median_sdr,baseline_median_sdr,delta");
  CHECK(lines[1].rfind("8,2,", 0) == 0);
  CHECK(lines[3].rfind("overall_median,4,", 0) == 0);
  CHECK(lines[4].rfind("mean_class_median,2,", 0) == 0);
  std::stringstream row(lines[1]);
  std::vector<std::string> cells;
  for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
  REQUIRE(cells.size() == 5);
  CHECK(std::stod(cells[4]) ==
        doctest::Approx(std::stod(cells[2]) - std::stod(cells[3])));
  std::ofstream(dir / "bad.json") << "{\"system\": 1}";
  try {
    LoadReportJson(dir / "bad.json");
    FAIL("malformed report accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kCorruptFile);
  }
  fs::remove_all(dir);
}

TEST_CASE("ideal ratio mask: high SDR, identity on an interferer-free mixture") {
  const corpus::CorpusManifest m =
      corpus::SelectSplit(corpus::MakeManifest(corpus::CorpusConfig{}), corpus::Split::kUnseen);
  const corpus::SourceSet src = corpus::SourceSet::Synthesize(m);
  const auto test = corpus::FixedTestMixtures(corpus::TestPart(m), src, 8000, 1);
  models::AudioConfig audio;
  const EvalReport oracle = IdealMaskOracle(test, audio);
  const EvalReport mix = MixtureReport(test);
  CHECK(oracle.overall_median >= 10.0);
  CHECK(oracle.overall_median > mix.overall_median);
  corpus::MixtureExample clean = test.front();
  clean.mixture = clean.target;
  const EvalReport self = IdealMaskOracle({clean}, audio);
  CHECK(self.overall_median > 60.0);
}

TEST_CASE("evaluate_system: missing class, thread-count invariance") {
  const corpus::CorpusManifest m =
      corpus::SelectSplit(corpus::MakeManifest(corpus::CorpusConfig{}), corpus::Split::kUnseen);
  const corpus::SourceSet src = corpus::SourceSet::Synthesize(m);
  auto test = corpus::FixedTestMixtures(corpus::TestPart(m), src, 8000, 2);
  test.resize(12);
  const models::Checkpoint uss = models::InitUss({}, {}, 5);
  std::vector<int> ids = m.ClassIds();
  const EvalReport one = EvaluateSystem(uss, Bank(ids, 64, 0.1f), test, "apt", 1);
  const EvalReport three = EvaluateSystem(uss, Bank(ids, 64, 0.1f), test, "apt", 3);
  REQUIRE(one.classes.size() == three.classes.size());
  for (std::size_t i = 0; i < one.classes.size(); ++i) {
    CHECK(one.classes[i].sdrs == three.classes[i].sdrs);
  }
  ids.pop_back();
  ids.erase(ids.begin());
  try {
    EvaluateSystem(uss, Bank(ids, 64, 0.1f), test, "apt");
    FAIL("missing class accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kMissingClass);
  }
}

TEST_CASE("projection: principal axes of known data, sign rule, duplication, rank") {
  std::mt19937 gen(5);
  std::normal_distribution<float> nd;
  std::vector<std::pair<int, std::vector<float>>> samples;
  for (int i = 0; i < 200; ++i) {
    // Variances 9, 1 and 0.01 along axes 2, 0 and 1.
    samples.push_back({i % 3, {nd(gen), 0.1f * nd(gen), 3.0f * nd(gen)}});
  }
  const apt::PromptBank init = Bank({0, 1, 2}, 3, 0.0f);
  apt::PromptBank tuned = Bank({0, 1, 2}, 3, 0.0f);
  tuned.prompts[2] = 1.0f;  // class 0 moves one unit along axis 2
  const ProjectionSet p = ProjectEmbeddings(samples, init, tuned);
  CHECK(std::abs(p.basis[0][2]) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(std::abs(p.basis[1][0]) == doctest::Approx(1.0).epsilon(1e-3));
  for (const auto& b : p.basis) {
    std::size_t arg = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (std::abs(b[i]) > std::abs(b[arg])) arg = i;
    }
    CHECK(b[arg] > 0);
  }
  CHECK(p.points.size() == 206);
  CHECK(MeanDisplacement(p) == doctest::Approx(1.0 / 3.0).epsilon(1e-3));

  std::vector<std::pair<int, std::vector<float>>> doubled = samples;
  doubled.insert(doubled.end(), samples.begin(), samples.end());
  const ProjectionSet q = ProjectEmbeddings(doubled, init, tuned);
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(q.basis[c][i] == doctest::Approx(p.basis[c][i]).epsilon(1e-9));
    }
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(q.points[i].x == doctest::Approx(p.points[i].x).epsilon(1e-9));
  }

  std::vector<std::pair<int, std::vector<float>>> flat(10, {0, {1.0f, 2.0f, 3.0f}});
  flat.push_back({1, {0.0f, 0.0f, 0.0f}});
  try {
    ProjectEmbeddings(flat, init, tuned);
    FAIL("two distinct points accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kRankDeficient);
  }
}
