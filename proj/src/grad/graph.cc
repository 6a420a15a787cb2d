// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/grad/graph.h"

#include <algorithm>
#include <cmath>

#include "aptsep/kernels/gemm.h"

namespace aptsep::grad {
namespace {

// Strided sum; switches to a double accumulator for long reductions.
template <typename T>
T SumStrided(const T* p, std::size_t n, std::size_t stride = 1) {
  if (n > kernels::kWideReductionThreshold) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += p[i * stride];
    return static_cast<T>(acc);
  }
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += p[i * stride];
  return acc;
}

template <typename T>
T DotRange(const T* a, const T* b, std::size_t n) {
  if (n > kernels::kWideReductionThreshold) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return static_cast<T>(acc);
  }
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

struct ConvGeom {
  std::size_t cin, h, w, cout, kh, kw, ho, wo;
  int stride, pad;
  std::size_t rows() const { return cin * kh * kw; }
  std::size_t cols() const { return ho * wo; }
};

// Output columns [lo, hi) whose input column ow * stride - pad + kj is in
// range.
void ValidColumns(const ConvGeom& g, std::size_t kj, std::size_t* lo,
                  std::size_t* hi) {
  const long s = g.stride;
  const long first = static_cast<long>(g.pad) - static_cast<long>(kj);
  const long last = static_cast<long>(g.w) - 1 + first;
  *lo = first > 0 ? static_cast<std::size_t>((first + s - 1) / s) : 0;
  *hi = last < 0 ? 0
                 : std::min(g.wo, static_cast<std::size_t>(last / s + 1));
  *lo = std::min(*lo, *hi);
}

template <typename T>
void Im2Col(const ConvGeom& g, const T* x, T* cols) {
  const std::size_t ncols = g.cols();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        std::size_t lo, hi;
        ValidColumns(g, kj, &lo, &hi);
        T* dst = cols + ((c * g.kh + ki) * g.kw + kj) * ncols;
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          const long ih = static_cast<long>(oh) * g.stride - g.pad +
                          static_cast<long>(ki);
          T* drow = dst + oh * g.wo;
          if (ih < 0 || ih >= static_cast<long>(g.h)) {
            std::fill(drow, drow + g.wo, T(0));
            continue;
          }
          const T* srow = x + (c * g.h + static_cast<std::size_t>(ih)) * g.w;
          const long shift = static_cast<long>(kj) - g.pad;
          std::fill(drow, drow + lo, T(0));
          if (lo < hi && g.stride == 1) {
            std::copy(srow + (static_cast<long>(lo) + shift),
                      srow + (static_cast<long>(hi) + shift), drow + lo);
          } else {
            for (std::size_t ow = lo; ow < hi; ++ow) {
              drow[ow] = srow[static_cast<long>(ow) * g.stride + shift];
            }
          }
          std::fill(drow + hi, drow + g.wo, T(0));
        }
      }
    }
  }
}

template <typename T>
void Col2ImAdd(const ConvGeom& g, const T* cols, T* dx) {
  const std::size_t ncols = g.cols();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        std::size_t lo, hi;
        ValidColumns(g, kj, &lo, &hi);
        const T* src = cols + ((c * g.kh + ki) * g.kw + kj) * ncols;
        for (std::size_t oh = 0; oh < g.ho; ++oh) {
          const long ih = static_cast<long>(oh) * g.stride - g.pad +
                          static_cast<long>(ki);
          if (ih < 0 || ih >= static_cast<long>(g.h)) continue;
          T* drow = dx + (c * g.h + static_cast<std::size_t>(ih)) * g.w;
          const long shift = static_cast<long>(kj) - g.pad;
          const T* srow = src + oh * g.wo;
          for (std::size_t ow = lo; ow < hi; ++ow) {
            drow[static_cast<long>(ow) * g.stride + shift] += srow[ow];
          }
        }
      }
    }
  }
}

template <typename T>
T SigmoidScalar(T v) {
  return v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                   : std::exp(v) / (T(1) + std::exp(v));
}

}  // namespace

const char* OpKindName(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kBiasAdd: return "bias_add";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSilu: return "silu";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kMeanTF: return "mean_tf";
    case OpKind::kFilm: return "film";
    case OpKind::kL1Loss: return "l1_loss";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_xent";
    case OpKind::kSum: return "sum";
    case OpKind::kReshape: return "reshape";
    case OpKind::kUpsample2x: return "upsample2x";
    case OpKind::kCustom: return "custom";
  }
  return "unknown";
}

template <typename T>
NodeId Graph<T>::Push(Node node) {
  for (NodeId in : node.inputs) CheckId(in);
  nodes_.push_back(std::move(node));
  evaluated_ = false;
  return static_cast<NodeId>(nodes_.size() - 1);
}

template <typename T>
void Graph<T>::CheckId(NodeId id) const {
  if (id >= nodes_.size()) {
    throw Error(Errc::kInvalidArgument,
                "node id " + std::to_string(id) + " out of range");
  }
}

template <typename T>
NodeId Graph<T>::Leaf(const std::string& name, bool trainable) {
  Node n{OpKind::kLeaf, name, {}};
  n.trainable = trainable;
  return Push(std::move(n));
}

template <typename T>
NodeId Graph<T>::MatMul(NodeId a, NodeId b) {
  return Push({OpKind::kMatMul, "", {a, b}});
}

template <typename T>
NodeId Graph<T>::Conv2d(NodeId x, NodeId w, int stride, int padding) {
  if (stride < 1 || padding < 0) {
    throw Error(Errc::kInvalidArgument, "conv2d stride/padding");
  }
  Node n{OpKind::kConv2d, "", {x, w}};
  n.stride = stride;
  n.padding = padding;
  return Push(std::move(n));
}

template <typename T>
NodeId Graph<T>::BiasAdd(NodeId x, NodeId bias) {
  return Push({OpKind::kBiasAdd, "", {x, bias}});
}
template <typename T>
NodeId Graph<T>::Relu(NodeId x) {
  return Push({OpKind::kRelu, "", {x}});
}
template <typename T>
NodeId Graph<T>::Sigmoid(NodeId x) {
  return Push({OpKind::kSigmoid, "", {x}});
}
template <typename T>
NodeId Graph<T>::Silu(NodeId x) {
  return Push({OpKind::kSilu, "", {x}});
}
template <typename T>
NodeId Graph<T>::Add(NodeId a, NodeId b) {
  return Push({OpKind::kAdd, "", {a, b}});
}
template <typename T>
NodeId Graph<T>::Mul(NodeId a, NodeId b) {
  return Push({OpKind::kMul, "", {a, b}});
}
template <typename T>
NodeId Graph<T>::MeanTF(NodeId x) {
  return Push({OpKind::kMeanTF, "", {x}});
}
template <typename T>
NodeId Graph<T>::Film(NodeId x, NodeId scale_shift) {
  return Push({OpKind::kFilm, "", {x, scale_shift}});
}
template <typename T>
NodeId Graph<T>::L1Loss(NodeId a, NodeId b) {
  return Push({OpKind::kL1Loss, "", {a, b}});
}
template <typename T>
NodeId Graph<T>::SoftmaxCrossEntropy(NodeId logits, NodeId target) {
  return Push({OpKind::kSoftmaxCrossEntropy, "", {logits, target}});
}
template <typename T>
NodeId Graph<T>::Sum(NodeId x) {
  return Push({OpKind::kSum, "", {x}});
}

template <typename T>
NodeId Graph<T>::Reshape(NodeId x, Shape shape) {
  NumElements(shape);
  Node n{OpKind::kReshape, "", {x}};
  n.shape_attr = std::move(shape);
  return Push(std::move(n));
}

template <typename T>
NodeId Graph<T>::Upsample2x(NodeId x, std::size_t height, std::size_t width) {
  Node n{OpKind::kUpsample2x, "", {x}};
  n.shape_attr = {height, width};
  return Push(std::move(n));
}

template <typename T>
NodeId Graph<T>::Custom(std::vector<NodeId> inputs,
                        std::shared_ptr<CustomOp<T>> op) {
  if (!op) throw Error(Errc::kInvalidArgument, "null custom op");
  Node n{OpKind::kCustom, op->name(), std::move(inputs)};
  n.custom = std::move(op);
  return Push(std::move(n));
}

template <typename T>
void Graph<T>::SetTrainable(NodeId leaf, bool trainable) {
  CheckId(leaf);
  if (nodes_[leaf].kind != OpKind::kLeaf) {
    throw Error(Errc::kInvalidArgument, "only leaves can be trainable");
  }
  nodes_[leaf].trainable = trainable;
  evaluated_ = false;
}

template <typename T>
bool Graph<T>::trainable(NodeId leaf) const {
  CheckId(leaf);
  return nodes_[leaf].trainable;
}

template <typename T>
NodeId Graph<T>::FindLeaf(const std::string& name) const {
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == OpKind::kLeaf && nodes_[i].name == name) return i;
  }
  throw Error(Errc::kInvalidArgument, "no leaf named '" + name + "'");
}

template <typename T>
std::vector<NodeId> Graph<T>::leaves() const {
  std::vector<NodeId> out;
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == OpKind::kLeaf) out.push_back(i);
  }
  return out;
}

template <typename T>
void Graph<T>::SetOutput(NodeId id) {
  CheckId(id);
  output_ = id;
  has_output_ = true;
}

template <typename T>
NodeId Graph<T>::output() const {
  if (nodes_.empty()) throw Error(Errc::kInvalidArgument, "empty graph");
  return has_output_ ? output_ : static_cast<NodeId>(nodes_.size() - 1);
}

template <typename T>
std::string Graph<T>::Describe(NodeId id) const {
  CheckId(id);
  const Node& n = nodes_[id];
  std::string s = "node " + std::to_string(id) + " (" + OpKindName(n.kind);
  if (!n.name.empty()) s += " '" + n.name + "'";
  return s + ")";
}

template <typename T>
void Graph<T>::ShapeError(NodeId id, const std::string& what) const {
  throw Error(Errc::kShapeMismatch, Describe(id) + ": " + what);
}

template <typename T>
const Tensor<T>& Graph<T>::In(NodeId node, std::size_t slot) const {
  return *refs_[nodes_[node].inputs[slot]];
}

template <typename T>
const Tensor<T>& Graph<T>::value(NodeId id) const {
  CheckId(id);
  if (!evaluated_ || refs_.size() != nodes_.size()) {
    throw Error(Errc::kBackwardBeforeForward,
                "value() requested before Evaluate()");
  }
  return *refs_[id];
}

template <typename T>
const Tensor<T>& Graph<T>::Evaluate(const Bindings<T>& bindings) {
  const std::size_t n = nodes_.size();
  if (n == 0) throw Error(Errc::kInvalidArgument, "empty graph");
  evaluated_ = false;
  refs_.assign(n, nullptr);
  values_.resize(n);
  scratch_.resize(n);
  needs_grad_.assign(n, 0);
  for (NodeId id = 0; id < n; ++id) {
    const Node& node = nodes_[id];
    if (node.kind == OpKind::kLeaf) {
      const Tensor<T>* bound = bindings.Find(id);
      if (bound == nullptr) {
        throw Error(Errc::kUnboundLeaf, Describe(id) + " has no binding");
      }
      refs_[id] = bound;
      needs_grad_[id] = node.trainable ? 1 : 0;
      continue;
    }
    Forward(id);
    refs_[id] = &values_[id];
    for (NodeId in : node.inputs) {
      if (needs_grad_[in]) needs_grad_[id] = 1;
    }
  }
  evaluated_ = true;
  return *refs_[output()];
}

template <typename T>
void Graph<T>::Forward(NodeId id) {
  const Node& node = nodes_[id];
  Tensor<T>& out = values_[id];
  switch (node.kind) {
    case OpKind::kLeaf:
      break;
    case OpKind::kMatMul: {
      const Tensor<T>& a = In(id, 0);
      const Tensor<T>& b = In(id, 1);
      if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        ShapeError(id, ShapeToString(a.shape()) + " x " +
                           ShapeToString(b.shape()));
      }
      out.Resize({a.dim(0), b.dim(1)});
      kernels::GemmNN(a.dim(0), b.dim(1), a.dim(1), a.data().data(),
                      b.data().data(), out.data().data(), false);
      break;
    }
    case OpKind::kConv2d: {
      const Tensor<T>& x = In(id, 0);
      const Tensor<T>& w = In(id, 1);
      if (x.rank() != 3 || w.rank() != 4 || w.dim(1) != x.dim(0)) {
        ShapeError(id, "input " + ShapeToString(x.shape()) + " weight " +
                           ShapeToString(w.shape()));
      }
      const long span_h = static_cast<long>(x.dim(1)) + 2 * node.padding -
                          static_cast<long>(w.dim(2));
      const long span_w = static_cast<long>(x.dim(2)) + 2 * node.padding -
                          static_cast<long>(w.dim(3));
      if (span_h < 0 || span_w < 0) ShapeError(id, "kernel exceeds input");
      ConvGeom g{x.dim(0), x.dim(1), x.dim(2), w.dim(0), w.dim(2), w.dim(3),
                 static_cast<std::size_t>(span_h / node.stride + 1),
                 static_cast<std::size_t>(span_w / node.stride + 1),
                 node.stride, node.padding};
      std::vector<T>& cols = scratch_[id];
      cols.resize(g.rows() * g.cols());
      Im2Col(g, x.data().data(), cols.data());
      out.Resize({g.cout, g.ho, g.wo});
      kernels::GemmNN(g.cout, g.cols(), g.rows(), w.data().data(), cols.data(),
                      out.data().data(), false);
      break;
    }
    case OpKind::kBiasAdd: {
      const Tensor<T>& x = In(id, 0);
      const Tensor<T>& b = In(id, 1);
      out.Resize(x.shape());
      const T* xs = x.data().data();
      T* o = out.data().data();
      if (x.rank() == 3) {
        if (b.size() != x.dim(0)) ShapeError(id, "bias vs channels");
        const std::size_t plane = x.dim(1) * x.dim(2);
        for (std::size_t c = 0; c < x.dim(0); ++c) {
          for (std::size_t i = 0; i < plane; ++i) {
            o[c * plane + i] = xs[c * plane + i] + b[c];
          }
        }
      } else {
        const std::size_t cols = x.shape().back();
        if (b.size() != cols) ShapeError(id, "bias vs columns");
        for (std::size_t i = 0; i < x.size(); ++i) o[i] = xs[i] + b[i % cols];
      }
      break;
    }
    case OpKind::kRelu: {
      const Tensor<T>& x = In(id, 0);
      out.Resize(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] > T(0) ? x[i] : T(0);
      }
      break;
    }
    case OpKind::kSigmoid: {
      const Tensor<T>& x = In(id, 0);
      out.Resize(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = SigmoidScalar(x[i]);
      break;
    }
    case OpKind::kSilu: {
      const Tensor<T>& x = In(id, 0);
      out.Resize(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] * SigmoidScalar(x[i]);
      }
      break;
    }
    case OpKind::kAdd:
    case OpKind::kMul: {
      const Tensor<T>& a = In(id, 0);
      const Tensor<T>& b = In(id, 1);
      if (a.shape() != b.shape()) {
        ShapeError(id, ShapeToString(a.shape()) + " vs " +
                           ShapeToString(b.shape()));
      }
      out.Resize(a.shape());
      if (node.kind == OpKind::kAdd) {
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
      } else {
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
      }
      break;
    }
    case OpKind::kMeanTF: {
      const Tensor<T>& x = In(id, 0);
      if (x.rank() != 3) ShapeError(id, "expects [C,H,W]");
      const std::size_t plane = x.dim(1) * x.dim(2);
      out.Resize({x.dim(0)});
      for (std::size_t c = 0; c < x.dim(0); ++c) {
        out[c] = SumStrided(x.data().data() + c * plane, plane) /
                 static_cast<T>(plane);
      }
      break;
    }
    case OpKind::kFilm: {
      const Tensor<T>& x = In(id, 0);
      const Tensor<T>& ss = In(id, 1);
      if (x.rank() != 3 || ss.size() != 2 * x.dim(0)) {
        ShapeError(id, "film input " + ShapeToString(x.shape()) +
                           " scale/shift " + ShapeToString(ss.shape()));
      }
      const std::size_t ch = x.dim(0);
      const std::size_t plane = x.dim(1) * x.dim(2);
      out.Resize(x.shape());
      for (std::size_t c = 0; c < ch; ++c) {
        const T scale = ss[c];
        const T shift = ss[ch + c];
        for (std::size_t i = 0; i < plane; ++i) {
          out[c * plane + i] = x[c * plane + i] * scale + shift;
        }
      }
      break;
    }
    case OpKind::kL1Loss: {
      const Tensor<T>& a = In(id, 0);
      const Tensor<T>& b = In(id, 1);
      if (a.size() != b.size()) {
        ShapeError(id, ShapeToString(a.shape()) + " vs " +
                           ShapeToString(b.shape()));
      }
      std::vector<T>& diff = scratch_[id];
      diff.resize(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        diff[i] = std::abs(a[i] - b[i]);
      }
      out.Resize({1});
      out[0] = SumStrided(diff.data(), diff.size()) / static_cast<T>(a.size());
      break;
    }
    case OpKind::kSoftmaxCrossEntropy: {
      const Tensor<T>& z = In(id, 0);
      const Tensor<T>& t = In(id, 1);
      if (z.size() != t.size()) ShapeError(id, "logits vs target size");
      std::vector<T>& prob = scratch_[id];
      prob.resize(z.size());
      const T zmax = *std::max_element(z.data().begin(), z.data().end());
      T denom = T(0);
      for (std::size_t i = 0; i < z.size(); ++i) {
        prob[i] = std::exp(z[i] - zmax);
        denom += prob[i];
      }
      const T log_denom = std::log(denom) + zmax;
      T loss = T(0);
      for (std::size_t i = 0; i < z.size(); ++i) {
        prob[i] /= denom;
        loss -= t[i] * (z[i] - log_denom);
      }
      out.Resize({1});
      out[0] = loss;
      break;
    }
    case OpKind::kSum: {
      const Tensor<T>& x = In(id, 0);
      out.Resize({1});
      out[0] = SumStrided(x.data().data(), x.size());
      break;
    }
    case OpKind::kReshape: {
      const Tensor<T>& x = In(id, 0);
      if (NumElements(node.shape_attr) != x.size()) {
        ShapeError(id, "cannot reshape " + ShapeToString(x.shape()) + " to " +
                           ShapeToString(node.shape_attr));
      }
      out.Resize(node.shape_attr);
      std::copy(x.data().begin(), x.data().end(), out.data().begin());
      break;
    }
    case OpKind::kUpsample2x: {
      const Tensor<T>& x = In(id, 0);
      const std::size_t oh = node.shape_attr[0];
      const std::size_t ow = node.shape_attr[1];
      if (x.rank() != 3 || (oh - 1) / 2 >= x.dim(1) ||
          (ow - 1) / 2 >= x.dim(2) || oh == 0 || ow == 0) {
        ShapeError(id, "cannot upsample " + ShapeToString(x.shape()) +
                           " to " + std::to_string(oh) + "x" +
                           std::to_string(ow));
      }
      const std::size_t ch = x.dim(0), h = x.dim(1), w = x.dim(2);
      out.Resize({ch, oh, ow});
      for (std::size_t c = 0; c < ch; ++c) {
        for (std::size_t i = 0; i < oh; ++i) {
          const T* src = x.data().data() + (c * h + i / 2) * w;
          T* dst = out.data().data() + (c * oh + i) * ow;
          for (std::size_t j = 0; j < ow; ++j) dst[j] = src[j / 2];
        }
      }
      break;
    }
    case OpKind::kCustom: {
      std::vector<const Tensor<T>*> ins;
      std::vector<Shape> shapes;
      for (std::size_t s = 0; s < node.inputs.size(); ++s) {
        ins.push_back(&In(id, s));
        shapes.push_back(ins.back()->shape());
      }
      Shape shape;
      try {
        shape = node.custom->OutputShape(shapes);
      } catch (const Error& e) {
        ShapeError(id, e.what());
      }
      out.Resize(shape);
      node.custom->Forward(ins, out);
      break;
    }
  }
}

template <typename T>
std::map<NodeId, Tensor<T>> Graph<T>::Backpropagate(const Tensor<T>& upstream) {
  if (!evaluated_ || refs_.size() != nodes_.size()) {
    throw Error(Errc::kBackwardBeforeForward,
                "Backpropagate() called before Evaluate()");
  }
  const NodeId out = output();
  if (upstream.shape() != refs_[out]->shape()) {
    throw Error(Errc::kShapeMismatch,
                "upstream " + ShapeToString(upstream.shape()) + " vs output " +
                    ShapeToString(refs_[out]->shape()));
  }
  grads_.resize(nodes_.size());
  for (NodeId id = 0; id <= out; ++id) {
    if (needs_grad_[id]) {
      grads_[id].assign(refs_[id]->size(), T(0));
    } else {
      grads_[id].clear();
    }
  }
  std::map<NodeId, Tensor<T>> result;
  if (needs_grad_[out]) {
    std::copy(upstream.data().begin(), upstream.data().end(),
              grads_[out].begin());
    for (NodeId id = out + 1; id-- > 0;) {
      if (needs_grad_[id] && nodes_[id].kind != OpKind::kLeaf) Backward(id);
    }
  }
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (node.kind != OpKind::kLeaf || !node.trainable) continue;
    Tensor<T> g(refs_[id]->shape());
    if (id <= out) {
      std::copy(grads_[id].begin(), grads_[id].end(), g.data().begin());
    }
    result.emplace(id, std::move(g));
  }
  return result;
}

template <typename T>
void Graph<T>::Backward(NodeId id) {
  const Node& node = nodes_[id];
  const std::vector<T>& gout = grads_[id];
  auto need = [&](std::size_t slot) {
    return needs_grad_[node.inputs[slot]] != 0;
  };
  auto gin = [&](std::size_t slot) -> T* {
    return grads_[node.inputs[slot]].data();
  };
  switch (node.kind) {
    case OpKind::kLeaf:
      break;
    case OpKind::kMatMul: {
      const Tensor<T>& a = In(id, 0);
      const Tensor<T>& b = In(id, 1);
      const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
      if (need(0)) {
        kernels::GemmNT(m, k, n, gout.data(), b.data().data(), gin(0), true);
      }
      if (need(1)) {
        kernels::GemmTN(k, n, m, a.data().data(), gout.data(), gin(1), true);
      }
      break;
    }
    case OpKind::kConv2d: {
      const Tensor<T>& x = In(id, 0);
      const Tensor<T>& w = In(id, 1);
      const Tensor<T>& y = values_[id];
      ConvGeom g{x.dim(0), x.dim(1), x.dim(2), w.dim(0), w.dim(2), w.dim(3),
                 y.dim(1), y.dim(2), node.stride, node.padding};
      const std::vector<T>& cols = scratch_[id];
      if (need(1)) {
        kernels::GemmNT(g.cout, g.rows(), g.cols(), gout.data(), cols.data(),
                        gin(1), true);
      }
      if (need(0)) {
        dcols_.resize(g.rows() * g.cols());
        kernels::GemmTN(g.rows(), g.cols(), g.cout, w.data().data(),
                        gout.data(), dcols_.data(), false);
        Col2ImAdd(g, dcols_.data(), gin(0));
      }
      break;
    }
    case OpKind::kBiasAdd: {
      const Tensor<T>& x = In(id, 0);
      if (need(0)) {
        T* gx = gin(0);
        for (std::size_t i = 0; i < gout.size(); ++i) gx[i] += gout[i];
      }
      if (need(1)) {
        T* gb = gin(1);
        if (x.rank() == 3) {
          const std::size_t plane = x.dim(1) * x.dim(2);
          for (std::size_t c = 0; c < x.dim(0); ++c) {
            gb[c] += SumStrided(gout.data() + c * plane, plane);
          }
        } else {
          const std::size_t cols = x.shape().back();
          const std::size_t rows = x.size() / cols;
          for (std::size_t j = 0; j < cols; ++j) {
            gb[j] += SumStrided(gout.data() + j, rows, cols);
          }
        }
      }
      break;
    }
    case OpKind::kRelu: {
      const Tensor<T>& x = In(id, 0);
      T* gx = gin(0);
      for (std::size_t i = 0; i < gout.size(); ++i) {
        if (x[i] > T(0)) gx[i] += gout[i];
      }
      break;
    }
    case OpKind::kSigmoid: {
      const Tensor<T>& y = values_[id];
      T* gx = gin(0);
      for (std::size_t i = 0; i < gout.size(); ++i) {
        gx[i] += gout[i] * y[i] * (T(1) - y[i]);
      }
      break;
    }
    case OpKind::kSilu: {
      const Tensor<T>& x = In(id, 0);
      T* gx = gin(0);
      for (std::size_t i = 0; i < gout.size(); ++i) {
        const T sg = SigmoidScalar(x[i]);
        gx[i] += gout[i] * sg * (T(1) + x[i] * (T(1) - sg));
      }
      break;
    }
    case OpKind::kAdd: {
      for (std::size_t s = 0; s < 2; ++s) {
        if (!need(s)) continue;
        T* g = gin(s);
        for (std::size_t i = 0; i < gout.size(); ++i) g[i] += gout[i];
      }
      break;
    }
    case OpKind::kMul: {
      const Tensor<T>& a = In(id, 0);
      const Tensor<T>& b = In(id, 1);
      if (need(0)) {
        T* g = gin(0);
        for (std::size_t i = 0; i < gout.size(); ++i) g[i] += gout[i] * b[i];
      }
      if (need(1)) {
        T* g = gin(1);
        for (std::size_t i = 0; i < gout.size(); ++i) g[i] += gout[i] * a[i];
      }
      break;
    }
    case OpKind::kMeanTF: {
      const Tensor<T>& x = In(id, 0);
      const std::size_t plane = x.dim(1) * x.dim(2);
      T* gx = gin(0);
      for (std::size_t c = 0; c < x.dim(0); ++c) {
        const T g = gout[c] / static_cast<T>(plane);
        for (std::size_t i = 0; i < plane; ++i) gx[c * plane + i] += g;
      }
      break;
    }
    case OpKind::kFilm: {
      const Tensor<T>& x = In(id, 0);
      const Tensor<T>& ss = In(id, 1);
      const std::size_t ch = x.dim(0);
      const std::size_t plane = x.dim(1) * x.dim(2);
      if (need(0)) {
        T* gx = gin(0);
        for (std::size_t c = 0; c < ch; ++c) {
          for (std::size_t i = 0; i < plane; ++i) {
            gx[c * plane + i] += gout[c * plane + i] * ss[c];
          }
        }
      }
      if (need(1)) {
        T* gss = gin(1);
        for (std::size_t c = 0; c < ch; ++c) {
          gss[c] += DotRange(gout.data() + c * plane,
                             x.data().data() + c * plane, plane);
          gss[ch + c] += SumStrided(gout.data() + c * plane, plane);
        }
      }
      break;
    }
    case OpKind::kL1Loss: {
      const Tensor<T>& a = In(id, 0);
      const Tensor<T>& b = In(id, 1);
      const T scale = gout[0] / static_cast<T>(a.size());
      for (std::size_t s = 0; s < 2; ++s) {
        if (!need(s)) continue;
        T* g = gin(s);
        const T sign_flip = s == 0 ? T(1) : T(-1);
        for (std::size_t i = 0; i < a.size(); ++i) {
          const T d = a[i] - b[i];
          if (d > T(0)) {
            g[i] += sign_flip * scale;
          } else if (d < T(0)) {
            g[i] -= sign_flip * scale;
          }
        }
      }
      break;
    }
    case OpKind::kSoftmaxCrossEntropy: {
      if (!need(0)) break;
      const Tensor<T>& t = In(id, 1);
      const std::vector<T>& prob = scratch_[id];
      T mass = T(0);
      for (std::size_t i = 0; i < t.size(); ++i) mass += t[i];
      T* g = gin(0);
      for (std::size_t i = 0; i < t.size(); ++i) {
        g[i] += gout[0] * (prob[i] * mass - t[i]);
      }
      break;
    }
    case OpKind::kSum: {
      T* g = gin(0);
      const std::size_t n = refs_[node.inputs[0]]->size();
      for (std::size_t i = 0; i < n; ++i) g[i] += gout[0];
      break;
    }
    case OpKind::kReshape: {
      T* g = gin(0);
      for (std::size_t i = 0; i < gout.size(); ++i) g[i] += gout[i];
      break;
    }
    case OpKind::kUpsample2x: {
      const Tensor<T>& x = In(id, 0);
      const std::size_t ch = x.dim(0), h = x.dim(1), w = x.dim(2);
      const std::size_t oh = node.shape_attr[0], ow = node.shape_attr[1];
      T* g = gin(0);
      for (std::size_t c = 0; c < ch; ++c) {
        for (std::size_t i = 0; i < oh; ++i) {
          T* dst = g + (c * h + i / 2) * w;
          const T* src = gout.data() + (c * oh + i) * ow;
          for (std::size_t j = 0; j < ow; ++j) dst[j / 2] += src[j];
        }
      }
      break;
    }
    case OpKind::kCustom: {
      std::vector<const Tensor<T>*> ins;
      std::vector<T*> gins;
      for (std::size_t s = 0; s < node.inputs.size(); ++s) {
        ins.push_back(&In(id, s));
        gins.push_back(need(s) ? gin(s) : nullptr);
      }
      node.custom->Backward(ins, values_[id], gout, gins);
      break;
    }
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace aptsep::grad
