// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_GRAD_ADAM_H_
#define APTSEP_GRAD_ADAM_H_

#include <cstddef>
#include <vector>

#include "aptsep/grad/tensor.h"

namespace aptsep::grad {

struct AdamOptions {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over a fixed set of tensors. Only registered tensors are ever
// touched; each must have requires_grad set. A coordinate whose gradient has
// always been zero is left bitwise unchanged.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void Register(Tensor<float>* param);
  // Applies one update from the accumulated grads, then zeroes them.
  void Step();

  // Number of scalar entries with optimizer state.
  std::size_t state_size() const;
  long step_count() const { return step_; }

 private:
  struct Slot {
    Tensor<float>* param;
    std::vector<double> m;
    std::vector<double> v;
  };
  AdamOptions options_;
  std::vector<Slot> slots_;
  long step_ = 0;
};

}  // namespace aptsep::grad

#endif  // APTSEP_GRAD_ADAM_H_
