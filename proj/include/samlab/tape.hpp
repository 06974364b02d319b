#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "samlab/dual.hpp"
#include "samlab/tensor.hpp"

namespace samlab {

using NodeId = std::size_t;

enum class OpKind {
  Leaf,       // the differentiated input
  Constant,   // data carried along without gradient
  Slice,      // contiguous block of an input, reshaped
  MatMul,     // (m x k) * (k x n)
  AddRowBias, // (m x n) + broadcast row (n)
  Add,
  Sub,
  Mul,        // elementwise, equal shapes
  Scale,      // multiply by a fixed double
  PowInt,     // elementwise integer power
  Sum,        // all elements -> scalar
  Gelu,
  Relu,
  SoftmaxCrossEntropy,  // mean over rows of -log softmax(logits)[label]
  MeanSquaredError,     // (1 / 2m) * sum of squared differences over m rows
};

const char* op_name(OpKind op);

// GeLU, tanh approximation: 0.5 z (1 + tanh(c (z + 0.044715 z^3))), c = sqrt(2/pi).
inline constexpr double kGeluC = 0.79788456080286535588;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

// Recorded computation over scalar type T (double, Dual1 or Dual2).
//
// Nodes are appended in evaluation order, so every node's inputs precede it.
// The tape is single-writer while it is being built; once built, backward()
// is const and may be replayed any number of times with identical results.
template <class T>
class Tape {
 public:
  struct Node {
    OpKind op = OpKind::Constant;
    std::vector<NodeId> inputs;
    BasicTensor<T> value;
    BasicTensor<T> saved;  // softmax probabilities for the cross-entropy head
    double scalar = 0.0;
    int exponent = 0;
    std::size_t offset = 0;
    std::vector<int> labels;
    bool needs_grad = false;
  };

  NodeId leaf(BasicTensor<T> value);
  NodeId constant(const Tensor& value);
  NodeId slice(NodeId x, std::size_t offset, Shape shape);
  NodeId matmul(NodeId a, NodeId b);
  NodeId add_row_bias(NodeId x, NodeId bias);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId pow_int(NodeId a, int k);
  NodeId sum(NodeId a);
  NodeId gelu(NodeId a);
  NodeId relu(NodeId a);
  NodeId softmax_cross_entropy(NodeId logits, std::span<const int> labels);
  NodeId mean_squared_error(NodeId prediction, NodeId target);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const BasicTensor<T>& value(NodeId id) const { return nodes_.at(id).value; }

  // Adjoints of every node for d(output)/d(node); output must be a scalar.
  std::vector<BasicTensor<T>> backward(NodeId output) const;
  BasicTensor<T> gradient(NodeId output, NodeId wrt) const;

 private:
  NodeId push(Node node);

  std::vector<Node> nodes_;
};

extern template class Tape<double>;
extern template class Tape<Dual1>;
extern template class Tape<Dual2>;

}  // namespace samlab
