// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/grad/adam.h"

#include <cmath>

namespace aptsep::grad {

void Adam::Register(Tensor<float>* param) {
  if (param == nullptr || !param->requires_grad()) {
    throw Error(Errc::kInvalidArgument,
                "Adam parameters must require grad");
  }
  slots_.push_back({param, std::vector<double>(param->size(), 0.0),
                    std::vector<double>(param->size(), 0.0)});
}

void Adam::Step() {
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (Slot& s : slots_) {
    if (!s.param->has_grad()) continue;
    std::span<float> w = s.param->data();
    std::span<const float> g = s.param->grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      s.m[i] = b1 * s.m[i] + (1.0 - b1) * gi;
      s.v[i] = b2 * s.v[i] + (1.0 - b2) * gi * gi;
      if (s.m[i] == 0.0) continue;
      const double mhat = s.m[i] / c1;
      const double vhat = s.v[i] / c2;
      w[i] = static_cast<float>(
          w[i] - options_.learning_rate * mhat /
                     (std::sqrt(vhat) + options_.epsilon));
    }
    s.param->ZeroGrad();
  }
}

std::size_t Adam::state_size() const {
  std::size_t n = 0;
  for (const Slot& s : slots_) n += s.m.size();
  return n;
}

}  // namespace aptsep::grad
