// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_COMMON_ERROR_H_
#define APTSEP_COMMON_ERROR_H_

#include <stdexcept>
#include <string>

namespace aptsep {

enum class Errc {
  kShapeMismatch,
  kUnboundLeaf,
  kBackwardBeforeForward,
  kNonFinite,
  kInputTooShort,
  kNonCola,
  kDegenerateBand,
  kLengthMismatch,
  kDimensionMismatch,
  kShotsTooLarge,
  kTooFewClasses,
  kDuplicateClass,
  kEmptyClass,
  kMissingClass,
  kCorruptFile,
  kVersionMismatch,
  kDivergence,
  kRankDeficient,
  kEmptyList,
  kInvalidArgument,
  kHashMismatch,
  kIo,
};

const char* ErrcName(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(ErrcName(code)) + ": " + what),
        code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace aptsep

#endif  // APTSEP_COMMON_ERROR_H_
