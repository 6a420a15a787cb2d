// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Define-then-run reverse-mode differentiation over dense tensors.
//
// A Graph is built once as a list of operation records in insertion order,
// which is also the evaluation order. Leaves are bound to caller-owned
// tensors on every Evaluate() call; intermediate activations are retained so
// that Backpropagate() can run afterwards. Only leaves marked trainable get
// gradients, and only nodes on a path from a trainable leaf to the output are
// visited during the backward pass.
//
// Layout conventions: feature maps are [channels, height, width]; matrices
// are [rows, cols]; losses are [1].

#ifndef APTSEP_GRAD_GRAPH_H_
#define APTSEP_GRAD_GRAPH_H_

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "aptsep/grad/tensor.h"

namespace aptsep::grad {

using NodeId = std::uint32_t;

enum class OpKind {
  kLeaf,
  kMatMul,
  kConv2d,
  kBiasAdd,
  kRelu,
  kSigmoid,
  kSilu,
  kAdd,
  kMul,
  kMeanTF,
  kFilm,
  kL1Loss,
  kSoftmaxCrossEntropy,
  kSum,
  kReshape,
  kUpsample2x,
  kCustom,
};

const char* OpKindName(OpKind kind);

// Extension point for operations that live outside this module (the
// spectral reconstruction in dsp). Backward must *accumulate* into the
// non-null entries of grad_in.
template <typename T>
class CustomOp {
 public:
  virtual ~CustomOp() = default;
  virtual std::string name() const = 0;
  virtual Shape OutputShape(std::span<const Shape> inputs) const = 0;
  virtual void Forward(std::span<const Tensor<T>* const> inputs,
                       Tensor<T>& out) = 0;
  virtual void Backward(std::span<const Tensor<T>* const> inputs,
                        const Tensor<T>& out, std::span<const T> grad_out,
                        std::span<T* const> grad_in) = 0;
};

// Non-owning map from leaf id to tensor. Bound tensors must outlive the
// Evaluate/Backpropagate calls that use them.
template <typename T>
class Bindings {
 public:
  void Bind(NodeId leaf, const Tensor<T>& value) { map_[leaf] = &value; }
  const Tensor<T>* Find(NodeId leaf) const {
    auto it = map_.find(leaf);
    return it == map_.end() ? nullptr : it->second;
  }

 private:
  std::unordered_map<NodeId, const Tensor<T>*> map_;
};

template <typename T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  NodeId Leaf(const std::string& name, bool trainable = false);

  NodeId MatMul(NodeId a, NodeId b);
  // x: [Cin,H,W], w: [Cout,Cin,KH,KW]; zero padding.
  NodeId Conv2d(NodeId x, NodeId w, int stride, int padding);
  // Rank-3 x gets a per-channel bias, rank-1/2 a per-column bias.
  NodeId BiasAdd(NodeId x, NodeId bias);
  NodeId Relu(NodeId x);
  NodeId Sigmoid(NodeId x);
  // x * sigmoid(x).
  NodeId Silu(NodeId x);
  NodeId Add(NodeId a, NodeId b);
  NodeId Mul(NodeId a, NodeId b);
  // [C,H,W] -> [C], mean over the time-frequency plane.
  NodeId MeanTF(NodeId x);
  // x: [C,H,W], scale_shift: 2C values (C scales then C shifts).
  NodeId Film(NodeId x, NodeId scale_shift);
  // mean(|a - b|) -> [1]; subgradient at zero is 0.
  NodeId L1Loss(NodeId a, NodeId b);
  // -sum(target * log_softmax(logits)) -> [1]; target is not differentiated.
  NodeId SoftmaxCrossEntropy(NodeId logits, NodeId target);
  NodeId Sum(NodeId x);
  NodeId Reshape(NodeId x, Shape shape);
  // Nearest-neighbour 2x upsampling of [C,h,w] to [C,height,width].
  NodeId Upsample2x(NodeId x, std::size_t height, std::size_t width);
  NodeId Custom(std::vector<NodeId> inputs, std::shared_ptr<CustomOp<T>> op);

  void SetTrainable(NodeId leaf, bool trainable);
  bool trainable(NodeId leaf) const;
  // Leaf id by name; throws kInvalidArgument if absent.
  NodeId FindLeaf(const std::string& name) const;
  std::vector<NodeId> leaves() const;

  void SetOutput(NodeId id);
  NodeId output() const;
  std::size_t size() const { return nodes_.size(); }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  std::string Describe(NodeId id) const;

  // Runs every node in insertion order and returns the output value.
  const Tensor<T>& Evaluate(const Bindings<T>& bindings);
  // Value of any node from the last Evaluate (leaves return their binding).
  const Tensor<T>& value(NodeId id) const;

  // Gradients of <upstream, output> for every trainable leaf.
  std::map<NodeId, Tensor<T>> Backpropagate(const Tensor<T>& upstream);

 private:
  struct Node {
    OpKind kind;
    std::string name;
    std::vector<NodeId> inputs;
    bool trainable = false;
    int stride = 1;
    int padding = 0;
    Shape shape_attr{};
    std::shared_ptr<CustomOp<T>> custom{};
  };

  NodeId Push(Node node);
  void CheckId(NodeId id) const;
  const Tensor<T>& In(NodeId node, std::size_t slot) const;
  [[noreturn]] void ShapeError(NodeId id, const std::string& what) const;
  void Forward(NodeId id);
  void Backward(NodeId id);

  std::vector<Node> nodes_;
  NodeId output_ = 0;
  bool has_output_ = false;

  // Per-evaluation state.
  std::vector<const Tensor<T>*> refs_;
  std::vector<Tensor<T>> values_;
  std::vector<std::vector<T>> scratch_;  // im2col columns, softmax, ...
  std::vector<std::vector<T>> grads_;
  std::vector<T> dcols_;
  std::vector<char> needs_grad_;
  bool evaluated_ = false;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace aptsep::grad

#endif  // APTSEP_GRAD_GRAPH_H_
