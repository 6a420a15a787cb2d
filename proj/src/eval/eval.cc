// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/eval/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "aptsep/common/error.h"
#include "aptsep/dsp/stft.h"
#include "json.hpp"

namespace aptsep::eval {
namespace {

using Json = nlohmann::json;

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string OptNum(const std::optional<double>& v) {
  return v ? Num(*v) : std::string();
}

std::string Delta(double v, const std::optional<double>& base) {
  return base ? Num(v - *base) : std::string();
}

Json OptJson(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::optional<double> ParseOpt(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

// Cyclic Jacobi eigen-decomposition of a symmetric matrix (row-major).
// Returns eigenvalues; columns of `vecs` are eigenvectors.
std::vector<double> JacobiEigen(std::vector<double> a, std::size_t n,
                                std::vector<double>* vecs) {
  std::vector<double>& v = *vecs;
  v.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        total += a[i * n + j] * a[i * n + j];
        if (i != j) off += a[i * n + j] * a[i * n + j];
      }
    }
    if (off <= 1e-30 * std::max(total, 1e-300)) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i * n + i];
  return eig;
}

}  // namespace

double Sdr(std::span<const float> reference, std::span<const float> estimate) {
  if (reference.size() != estimate.size()) {
    throw Error(Errc::kLengthMismatch,
                "SDR reference has " + std::to_string(reference.size()) +
                    " samples, estimate " + std::to_string(estimate.size()));
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double s = reference[i];
    const double e = s - static_cast<double>(estimate[i]);
    num += s * s;
    den += e * e;
  }
  return 10.0 * std::log10((num + kSdrEpsilon) / (den + kSdrEpsilon));
}

double Sdr(const dsp::Waveform& reference, const dsp::Waveform& estimate) {
  return Sdr(reference.samples, estimate.samples);
}

double Median(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::kEmptyList, "median of empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

const ClassReport& EvalReport::Class(int class_id) const {
  for (const ClassReport& c : classes) {
    if (c.class_id == class_id) return c;
  }
  throw Error(Errc::kMissingClass,
              "class " + std::to_string(class_id) + " not in report");
}

std::size_t EvalReport::clip_count() const {
  std::size_t n = 0;
  for (const ClassReport& c : classes) n += c.sdrs.size();
  return n;
}

EvalReport Aggregate(const std::vector<int>& classes,
                     const std::vector<double>& sdrs, std::string system) {
  if (classes.size() != sdrs.size()) {
    throw Error(Errc::kLengthMismatch, "class and SDR lists differ");
  }
  if (sdrs.empty()) throw Error(Errc::kEmptyList, "no test mixtures");
  std::map<int, std::vector<double>> by_class;
  for (std::size_t i = 0; i < sdrs.size(); ++i) {
    by_class[classes[i]].push_back(sdrs[i]);
  }
  EvalReport r;
  r.system = std::move(system);
  double sum = 0.0;
  for (auto& [k, list] : by_class) {
    ClassReport c;
    c.class_id = k;
    c.median = Median(list);
    c.sdrs = std::move(list);
    sum += c.median;
    r.classes.push_back(std::move(c));
  }
  r.overall_median = Median(sdrs);
  r.mean_class_median = sum / static_cast<double>(r.classes.size());
  return r;
}

EvalReport EvaluateSystem(const models::Checkpoint& uss,
                          const apt::PromptBank& bank,
                          const std::vector<corpus::MixtureExample>& test,
                          const std::string& label, int threads) {
  for (const corpus::MixtureExample& ex : test) {
    if (!bank.Has(ex.target_class)) {
      throw Error(Errc::kMissingClass,
                  "test class " + std::to_string(ex.target_class) +
                      " has no prompt in the bank");
    }
  }
  std::vector<double> sdrs(test.size());
  std::vector<int> classes(test.size());
  const std::size_t workers = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::max(threads, 1)), 1,
      std::max<std::size_t>(test.size(), 1));
  auto work = [&](std::size_t w) {
    models::UssModel model(uss);
    for (std::size_t i = w; i < test.size(); i += workers) {
      const corpus::MixtureExample& ex = test[i];
      const dsp::Waveform est =
          model.Separate(ex.mixture, bank.Row(ex.target_class));
      sdrs[i] = Sdr(ex.target, est);
      classes[i] = ex.target_class;
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (std::thread& t : pool) t.join();
  }
  EvalReport r = Aggregate(classes, sdrs, label);
  r.shots = bank.shots;
  r.seed = bank.seed;
  r.config_hash = bank.config_hash;
  return r;
}

EvalReport MixtureReport(const std::vector<corpus::MixtureExample>& test) {
  std::vector<double> sdrs;
  std::vector<int> classes;
  for (const corpus::MixtureExample& ex : test) {
    sdrs.push_back(Sdr(ex.target, ex.mixture));
    classes.push_back(ex.target_class);
  }
  return Aggregate(classes, sdrs, "mixture");
}

EvalReport IdealMaskOracle(const std::vector<corpus::MixtureExample>& test,
                           const models::AudioConfig& audio) {
  std::vector<double> sdrs;
  std::vector<int> classes;
  for (const corpus::MixtureExample& ex : test) {
    dsp::Waveform noise = ex.mixture;
    for (std::size_t i = 0; i < noise.size(); ++i) {
      noise.samples[i] = ex.mixture.samples[i] - ex.target.samples[i];
    }
    const dsp::Spectrogram<float> s = dsp::Stft(ex.target, audio.n_fft, audio.hop);
    const dsp::Spectrogram<float> n = dsp::Stft(noise, audio.n_fft, audio.hop);
    dsp::Spectrogram<float> y = dsp::Stft(ex.mixture, audio.n_fft, audio.hop);
    for (std::size_t t = 0; t < y.frames; ++t) {
      for (std::size_t k = 0; k < y.bins; ++k) {
        const float ms = s.Magnitude(t, k), mn = n.Magnitude(t, k);
        const float m = (ms + mn) > 0.0f ? ms / (ms + mn) : 1.0f;
        y.real[t * y.bins + k] *= m;
        y.imag[t * y.bins + k] *= m;
      }
    }
    sdrs.push_back(Sdr(ex.target, dsp::Istft(y, ex.target.size(),
                                             ex.target.sample_rate)));
    classes.push_back(ex.target_class);
  }
  return Aggregate(classes, sdrs, "oracle");
}

void AttachBaseline(EvalReport& report, const EvalReport& baseline) {
  if (report.classes.size() != baseline.classes.size()) {
    throw Error(Errc::kInvalidArgument, "baseline covers different classes");
  }
  for (std::size_t i = 0; i < report.classes.size(); ++i) {
    ClassReport& c = report.classes[i];
    const ClassReport& b = baseline.classes[i];
    if (c.class_id != b.class_id || c.sdrs.size() != b.sdrs.size()) {
      throw Error(Errc::kInvalidArgument,
                  "baseline does not pair with class " +
                      std::to_string(c.class_id));
    }
    c.baseline_median = b.median;
  }
  report.baseline_overall_median = baseline.overall_median;
  report.baseline_mean_class_median = baseline.mean_class_median;
}

int ImprovedClasses(const EvalReport& report, const EvalReport& baseline) {
  int n = 0;
  for (const ClassReport& c : report.classes) {
    if (c.median > baseline.Class(c.class_id).median) ++n;
  }
  return n;
}

std::string ReportToJson(const EvalReport& r) {
  Json j;
  j["system"] = r.system;
  j["shots"] = r.shots;
  j["seed"] = std::to_string(r.seed);
  j["config_hash"] = r.config_hash;
  j["overall_median"] = r.overall_median;
  j["mean_class_median"] = r.mean_class_median;
  j["baseline_overall_median"] = OptJson(r.baseline_overall_median);
  j["baseline_mean_class_median"] = OptJson(r.baseline_mean_class_median);
  j["classes"] = Json::array();
  for (const ClassReport& c : r.classes) {
    j["classes"].push_back({{"class_id", c.class_id},
                            {"count", c.sdrs.size()},
                            {"median", c.median},
                            {"baseline_median", OptJson(c.baseline_median)},
                            {"sdrs", c.sdrs}});
  }
  return j.dump(1);
}

EvalReport ReportFromJson(const std::string& text) {
  EvalReport r;
  try {
    const Json j = Json::parse(text);
    r.system = j.at("system").get<std::string>();
    r.shots = j.at("shots").get<int>();
    r.seed = std::stoull(j.at("seed").get<std::string>());
    r.config_hash = j.at("config_hash").get<std::string>();
    r.overall_median = j.at("overall_median").get<double>();
    r.mean_class_median = j.at("mean_class_median").get<double>();
    r.baseline_overall_median = ParseOpt(j.at("baseline_overall_median"));
    r.baseline_mean_class_median =
        ParseOpt(j.at("baseline_mean_class_median"));
    for (const Json& c : j.at("classes")) {
      ClassReport cr;
      cr.class_id = c.at("class_id").get<int>();
      cr.median = c.at("median").get<double>();
      cr.baseline_median = ParseOpt(c.at("baseline_median"));
      cr.sdrs = c.at("sdrs").get<std::vector<double>>();
      if (cr.sdrs.size() != c.at("count").get<std::size_t>()) {
        throw Error(Errc::kCorruptFile, "report count disagrees with list");
      }
      r.classes.push_back(std::move(cr));
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::kCorruptFile, std::string("malformed report: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(Errc::kCorruptFile, "malformed report seed");
  }
  return r;
}

void EmitReport(const EvalReport& r, const std::filesystem::path& path,
                ReportFormat format) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::kIo, "cannot write " + path.string());
  if (format == ReportFormat::kJson) {
    os << ReportToJson(r) << '\n';
  } else {
    os << "class_id,n_test,median_sdr,baseline_median_sdr,delta\n";
    for (const ClassReport& c : r.classes) {
      os << c.class_id << ',' << c.sdrs.size() << ',' << Num(c.median) << ','
         << OptNum(c.baseline_median) << ','
         << Delta(c.median, c.baseline_median) << '\n';
    }
    os << "overall_median," << r.clip_count() << ',' << Num(r.overall_median)
       << ',' << OptNum(r.baseline_overall_median) << ','
       << Delta(r.overall_median, r.baseline_overall_median) << '\n';
    os << "mean_class_median," << r.classes.size() << ','
       << Num(r.mean_class_median) << ','
       << OptNum(r.baseline_mean_class_median) << ','
       << Delta(r.mean_class_median, r.baseline_mean_class_median) << '\n';
  }
  if (!os) throw Error(Errc::kIo, "cannot write " + path.string());
}

EvalReport LoadReportJson(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::kIo, "cannot open report " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ReportFromJson(ss.str());
}

ProjectionSet ProjectEmbeddings(
    const std::vector<std::pair<int, std::vector<float>>>& samples,
    const apt::PromptBank& initial, const apt::PromptBank& tuned) {
  std::set<std::vector<float>> distinct;
  for (const auto& s : samples) distinct.insert(s.second);
  if (distinct.size() < 3) {
    throw Error(Errc::kRankDeficient,
                "PCA needs at least three distinct embeddings");
  }
  const std::size_t d = samples.front().second.size();
  if (initial.dim != d || tuned.dim != d) {
    throw Error(Errc::kDimensionMismatch, "prompt and embedding dimensions");
  }
  ProjectionSet out;
  out.mean.assign(d, 0.0);
  for (const auto& s : samples) {
    if (s.second.size() != d) {
      throw Error(Errc::kDimensionMismatch, "embedding dimensions differ");
    }
    for (std::size_t i = 0; i < d; ++i) out.mean[i] += s.second[i];
  }
  const double n = static_cast<double>(samples.size());
  for (double& m : out.mean) m /= n;
  std::vector<double> cov(d * d, 0.0);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = s.second[i] - out.mean[i];
      for (std::size_t j = 0; j < d; ++j) {
        cov[i * d + j] += ci * (s.second[j] - out.mean[j]);
      }
    }
  }
  for (double& c : cov) c /= n;
  std::vector<double> vecs;
  const std::vector<double> eig = JacobiEigen(cov, d, &vecs);
  std::vector<std::size_t> order(d);
  for (std::size_t i = 0; i < d; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return eig[a] > eig[b]; });
  for (int c = 0; c < 2; ++c) {
    std::vector<double>& b = out.basis[c];
    b.resize(d);
    std::size_t arg = 0;
    for (std::size_t i = 0; i < d; ++i) {
      b[i] = vecs[i * d + order[c]];
      if (std::abs(b[i]) > std::abs(b[arg])) arg = i;
    }
    if (b[arg] < 0) {
      for (double& v : b) v = -v;
    }
  }
  auto project = [&](int label, const std::string& role,
                     std::span<const float> v) {
    double x = 0.0, y = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      x += (v[i] - out.mean[i]) * out.basis[0][i];
      y += (v[i] - out.mean[i]) * out.basis[1][i];
    }
    out.points.push_back({label, role, x, y});
  };
  for (const auto& s : samples) project(s.first, "sample-embedding", s.second);
  for (int k : initial.class_ids) project(k, "initial-prompt", initial.Row(k));
  for (int k : tuned.class_ids) project(k, "tuned-prompt", tuned.Row(k));
  return out;
}

ProjectionSet ProjectEmbeddings(models::SedModel& sed,
                                const corpus::CorpusManifest& manifest,
                                const corpus::SourceSet& sources,
                                const apt::PromptBank& initial,
                                const apt::PromptBank& tuned) {
  std::vector<std::pair<int, std::vector<float>>> samples;
  for (const corpus::ManifestEntry& e : manifest.entries) {
    samples.emplace_back(e.class_id, sed.Embed(sources.Get(e)));
  }
  return ProjectEmbeddings(samples, initial, tuned);
}

double MeanDisplacement(const ProjectionSet& p) {
  std::map<int, std::pair<double, double>> init;
  for (const ProjectionPoint& q : p.points) {
    if (q.role == "initial-prompt") init[q.label] = {q.x, q.y};
  }
  double sum = 0.0;
  int n = 0;
  for (const ProjectionPoint& q : p.points) {
    if (q.role != "tuned-prompt") continue;
    auto it = init.find(q.label);
    if (it == init.end()) continue;
    sum += std::hypot(q.x - it->second.first, q.y - it->second.second);
    ++n;
  }
  return n ? sum / n : 0.0;
}

void EmitProjectionCsv(const ProjectionSet& p,
                       const std::filesystem::path& path) {
  std::ofstream os(path);
  os << "label,role,x,y\n";
  for (const ProjectionPoint& q : p.points) {
    os << q.label << ',' << q.role << ',' << Num(q.x) << ',' << Num(q.y)
       << '\n';
  }
  if (!os) throw Error(Errc::kIo, "cannot write " + path.string());
}

}  // namespace aptsep::eval
