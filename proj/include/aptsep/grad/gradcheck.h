// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_GRAD_GRADCHECK_H_
#define APTSEP_GRAD_GRADCHECK_H_

#include <functional>
#include <vector>

#include "aptsep/grad/graph.h"

namespace aptsep::grad {

template <typename T>
struct ValueAndGrad {
  T value;
  std::vector<T> grad;
};

template <typename T>
using DifferentiableFn = std::function<ValueAndGrad<T>(const Tensor<T>&)>;

// max_i |analytic_i - central_i| / max(|analytic_i|, |central_i|, 1e-8),
// with central_i = (f(x + step e_i) - f(x - step e_i)) / (2 step).
// Throws kNonFinite if any evaluation is not finite.
template <typename T>
double FiniteDifferenceCheck(const DifferentiableFn<T>& f, const Tensor<T>& x,
                             double step);

// Wraps a graph with scalar output as a function of one trainable leaf. All
// other leaves keep the bindings given here.
template <typename T>
DifferentiableFn<T> GraphFunction(Graph<T>& graph, const Bindings<T>& bindings,
                                  NodeId leaf);

extern template double FiniteDifferenceCheck<float>(
    const DifferentiableFn<float>&, const Tensor<float>&, double);
extern template double FiniteDifferenceCheck<double>(
    const DifferentiableFn<double>&, const Tensor<double>&, double);
extern template DifferentiableFn<float> GraphFunction<float>(
    Graph<float>&, const Bindings<float>&, NodeId);
extern template DifferentiableFn<double> GraphFunction<double>(
    Graph<double>&, const Bindings<double>&, NodeId);

}  // namespace aptsep::grad

#endif  // APTSEP_GRAD_GRADCHECK_H_
