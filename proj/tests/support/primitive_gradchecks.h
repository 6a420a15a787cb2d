// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_TESTS_SUPPORT_PRIMITIVE_GRADCHECKS_H_
#define APTSEP_TESTS_SUPPORT_PRIMITIVE_GRADCHECKS_H_

#include <cstdint>
#include <string>
#include <vector>

namespace aptsep::testing {

struct OpGradcheck {
  std::string op;
  int trials = 0;
  double worst = 0.0;  // max relative error over trials and inputs
};

// Central-difference checks (double precision, step 1e-3) of every
// primitive graph operation on random small inputs, `trials` seeded trials
// per operation. Inputs to kinked operations are kept at least 0.05 away
// from the kink, and SiLU inputs from its stationary point.
std::vector<OpGradcheck> RunPrimitiveGradchecks(int trials,
                                                std::uint64_t seed);

}  // namespace aptsep::testing

#endif  // APTSEP_TESTS_SUPPORT_PRIMITIVE_GRADCHECKS_H_
