// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_CLI_CLI_H_
#define APTSEP_CLI_CLI_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace aptsep::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Artifact locations below the configured output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path CorpusDir() const { return root / "corpus"; }
  std::filesystem::path Manifest() const { return CorpusDir() / "manifest.json"; }
  std::filesystem::path RunLog() const { return root / "run_log.jsonl"; }
  std::filesystem::path SweepSummary() const { return root / "sweep.json"; }
  std::filesystem::path SeedDir(int offset) const;
  std::filesystem::path SedCheckpoint(int offset) const;
  std::filesystem::path UssCheckpoint(int offset) const;
  std::filesystem::path JointCheckpoint(int offset, int shots) const;
  std::filesystem::path PretrainLog(int offset) const;
  // kind: initial, tuned, joint
  std::filesystem::path Bank(int offset, const std::string& kind,
                             int shots) const;
  std::filesystem::path TuneLog(int offset, const std::string& kind,
                                int shots) const;
  // system: baseline-zero-shot, apt, joint, oracle, mixture. The oracle and
  // mixture reports do not depend on shots.
  std::filesystem::path Report(int offset, const std::string& system,
                               int shots, const std::string& ext) const;
  std::filesystem::path Embeddings(int offset) const;
  std::filesystem::path Projection(int offset, int shots) const;
};

// Runs one subcommand. Exit codes: 0 success, 1 usage error (unknown
// subcommand, bad flag, missing config or input file), 2 runtime failure.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);
int Run(const std::vector<std::string>& args);

// Worker cap from APT_SEP_THREADS, else the hardware concurrency.
int WorkerThreads();

}  // namespace aptsep::cli

#endif  // APTSEP_CLI_CLI_H_
