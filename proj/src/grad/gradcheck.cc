// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/grad/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace aptsep::grad {

template <typename T>
double FiniteDifferenceCheck(const DifferentiableFn<T>& f, const Tensor<T>& x,
                             double step) {
  if (!(step > 0.0)) throw Error(Errc::kInvalidArgument, "step must be > 0");
  const ValueAndGrad<T> at = f(x);
  if (!std::isfinite(static_cast<double>(at.value))) {
    throw Error(Errc::kNonFinite, "f(x) is not finite");
  }
  if (at.grad.size() != x.size()) {
    throw Error(Errc::kShapeMismatch, "gradient size differs from x");
  }
  double worst = 0.0;
  Tensor<T> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = static_cast<T>(static_cast<double>(x[i]) + step);
    const double up = static_cast<double>(f(probe).value);
    probe[i] = static_cast<T>(static_cast<double>(x[i]) - step);
    const double down = static_cast<double>(f(probe).value);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(Errc::kNonFinite,
                  "f not finite around coordinate " + std::to_string(i));
    }
    const double central = (up - down) / (2.0 * step);
    const double analytic = static_cast<double>(at.grad[i]);
    const double denom =
        std::max({std::abs(analytic), std::abs(central), 1e-8});
    worst = std::max(worst, std::abs(analytic - central) / denom);
  }
  return worst;
}

template <typename T>
DifferentiableFn<T> GraphFunction(Graph<T>& graph, const Bindings<T>& bindings,
                                  NodeId leaf) {
  graph.SetTrainable(leaf, true);
  return [&graph, bindings, leaf](const Tensor<T>& x) {
    Bindings<T> local = bindings;
    local.Bind(leaf, x);
    const Tensor<T>& out = graph.Evaluate(local);
    if (out.size() != 1) {
      throw Error(Errc::kShapeMismatch, "graph output is not scalar");
    }
    ValueAndGrad<T> r{out[0], {}};
    Tensor<T> one({1}, {T(1)});
    auto grads = graph.Backpropagate(one);
    const Tensor<T>& g = grads.at(leaf);
    r.grad.assign(g.data().begin(), g.data().end());
    return r;
  };
}

template double FiniteDifferenceCheck<float>(const DifferentiableFn<float>&,
                                             const Tensor<float>&, double);
template double FiniteDifferenceCheck<double>(const DifferentiableFn<double>&,
                                              const Tensor<double>&, double);
template DifferentiableFn<float> GraphFunction<float>(Graph<float>&,
                                                      const Bindings<float>&,
                                                      NodeId);
template DifferentiableFn<double> GraphFunction<double>(
    Graph<double>&, const Bindings<double>&, NodeId);

}  // namespace aptsep::grad
