// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/common/error.h"

namespace aptsep {

const char* ErrcName(Errc code) {
  switch (code) {
    case Errc::kShapeMismatch: return "shape mismatch";
    case Errc::kUnboundLeaf: return "unbound leaf";
    case Errc::kBackwardBeforeForward: return "backward before forward";
    case Errc::kNonFinite: return "non-finite value";
    case Errc::kInputTooShort: return "input too short";
    case Errc::kNonCola: return "non-COLA configuration";
    case Errc::kDegenerateBand: return "degenerate mel band";
    case Errc::kLengthMismatch: return "length mismatch";
    case Errc::kDimensionMismatch: return "dimension mismatch";
    case Errc::kShotsTooLarge: return "shots too large";
    case Errc::kTooFewClasses: return "too few classes";
    case Errc::kDuplicateClass: return "duplicate class id";
    case Errc::kEmptyClass: return "empty class";
    case Errc::kMissingClass: return "missing class";
    case Errc::kCorruptFile: return "corrupt file";
    case Errc::kVersionMismatch: return "version mismatch";
    case Errc::kDivergence: return "divergence";
    case Errc::kRankDeficient: return "rank deficient";
    case Errc::kEmptyList: return "empty list";
    case Errc::kInvalidArgument: return "invalid argument";
    case Errc::kHashMismatch: return "hash mismatch";
    case Errc::kIo: return "i/o error";
  }
  return "unknown error";
}

}  // namespace aptsep
