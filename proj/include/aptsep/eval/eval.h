// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_EVAL_EVAL_H_
#define APTSEP_EVAL_EVAL_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aptsep/apt/apt.h"
#include "aptsep/corpus/corpus.h"
#include "aptsep/dsp/waveform.h"
#include "aptsep/models/checkpoint.h"
#include "aptsep/models/models.h"

namespace aptsep::eval {

inline constexpr double kSdrEpsilon = 1e-8;

// 10 log10((sum s^2 + eps) / (sum (s - est)^2 + eps)), accumulated in
// double. Throws kLengthMismatch.
double Sdr(std::span<const float> reference, std::span<const float> estimate);
double Sdr(const dsp::Waveform& reference, const dsp::Waveform& estimate);

// Mean of the two middle elements for even lengths. Throws kEmptyList.
double Median(std::vector<double> values);

struct ClassReport {
  int class_id = 0;
  std::vector<double> sdrs;  // in test-mixture order
  double median = 0.0;
  std::optional<double> baseline_median;
};

struct EvalReport {
  std::string system;  // baseline-zero-shot, apt, joint, oracle, mixture
  int shots = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<ClassReport> classes;  // ascending class id
  double overall_median = 0.0;       // median over all clips
  double mean_class_median = 0.0;
  std::optional<double> baseline_overall_median;
  std::optional<double> baseline_mean_class_median;

  const ClassReport& Class(int class_id) const;
  std::size_t clip_count() const;
};

// Groups per-mixture SDRs by class and fills the aggregates.
EvalReport Aggregate(const std::vector<int>& classes,
                     const std::vector<double>& sdrs, std::string system);

// Separates every mixture with its target-class prompt. Mixtures are
// processed by up to `threads` workers; aggregation is in index order.
// Throws kMissingClass.
EvalReport EvaluateSystem(const models::Checkpoint& uss,
                          const apt::PromptBank& bank,
                          const std::vector<corpus::MixtureExample>& test,
                          const std::string& label, int threads = 1);

// SDR of each mixture itself against its target.
EvalReport MixtureReport(const std::vector<corpus::MixtureExample>& test);

// Ideal ratio mask |S| / (|S| + |N|) on the mixture STFT, mixture phase.
EvalReport IdealMaskOracle(const std::vector<corpus::MixtureExample>& test,
                           const models::AudioConfig& audio);

// Fills the baseline fields; classes and clip counts must match.
void AttachBaseline(EvalReport& report, const EvalReport& baseline);

// Classes whose median beats the baseline median.
int ImprovedClasses(const EvalReport& report, const EvalReport& baseline);

enum class ReportFormat { kCsv, kJson };

// CSV columns: class_id, n_test, median_sdr, baseline_median_sdr, delta,
// then overall_median and mean_class_median footer rows.
void EmitReport(const EvalReport& report, const std::filesystem::path& path,
                ReportFormat format);
EvalReport LoadReportJson(const std::filesystem::path& path);
std::string ReportToJson(const EvalReport& report);
EvalReport ReportFromJson(const std::string& text);

struct ProjectionPoint {
  int label = 0;
  std::string role;  // sample-embedding, initial-prompt, tuned-prompt
  double x = 0.0;
  double y = 0.0;
};

struct ProjectionSet {
  std::vector<ProjectionPoint> points;
  std::vector<double> mean;
  std::array<std::vector<double>, 2> basis;
};

// PCA (population covariance, Jacobi eigensolver) fitted on the samples;
// each basis vector's largest-magnitude loading is made positive. Throws
// kRankDeficient with fewer than three distinct samples.
ProjectionSet ProjectEmbeddings(
    const std::vector<std::pair<int, std::vector<float>>>& samples,
    const apt::PromptBank& initial, const apt::PromptBank& tuned);

ProjectionSet ProjectEmbeddings(models::SedModel& sed,
                                const corpus::CorpusManifest& manifest,
                                const corpus::SourceSet& sources,
                                const apt::PromptBank& initial,
                                const apt::PromptBank& tuned);

// Mean length of the tuned-minus-initial prompt displacement in the plane.
double MeanDisplacement(const ProjectionSet& projection);

void EmitProjectionCsv(const ProjectionSet& projection,
                       const std::filesystem::path& path);

}  // namespace aptsep::eval

#endif  // APTSEP_EVAL_EVAL_H_
