// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/grad/tensor.h"

namespace aptsep::grad {

std::size_t NumElements(const Shape& shape) {
  if (shape.empty()) throw Error(Errc::kShapeMismatch, "empty shape");
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) {
      throw Error(Errc::kShapeMismatch,
                  "zero dimension in shape " + ShapeToString(shape));
    }
    n *= d;
  }
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace aptsep::grad
