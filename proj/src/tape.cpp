#include "samlab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace samlab {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Constant: return "constant";
    case OpKind::Slice: return "slice";
    case OpKind::MatMul: return "matmul";
    case OpKind::AddRowBias: return "add_row_bias";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::PowInt: return "pow_int";
    case OpKind::Sum: return "sum";
    case OpKind::Gelu: return "gelu";
    case OpKind::Relu: return "relu";
    case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::MeanSquaredError: return "mean_squared_error";
  }
  return "?";
}

namespace {

template <class T>
T ipow(const T& x, int k) {
  T r(1.0);
  for (int i = 0; i < k; ++i) r = r * x;
  return r;
}

void require(bool ok, const char* op, const std::string& msg) {
  if (!ok) throw std::invalid_argument(std::string(op) + ": " + msg);
}

template <class T>
T gelu_value(const T& z) {
  using std::tanh;
  const T inner = kGeluC * (z + kGeluA * z * z * z);
  return 0.5 * z * (1.0 + tanh(inner));
}

template <class T>
T gelu_slope(const T& z) {
  using std::tanh;
  const T inner = kGeluC * (z + kGeluA * z * z * z);
  const T t = tanh(inner);
  return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * z * z);
}

}  // namespace

template <class T>
NodeId Tape<T>::push(Node node) {
  for (NodeId in : node.inputs) {
    if (in >= nodes_.size()) throw std::out_of_range("tape input refers to a later node");
    if (nodes_[in].needs_grad) node.needs_grad = true;
  }
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

template <class T>
NodeId Tape<T>::leaf(BasicTensor<T> value) {
  Node n;
  n.op = OpKind::Leaf;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::constant(const Tensor& value) {
  Node n;
  n.op = OpKind::Constant;
  n.value = BasicTensor<T>(value.shape);
  for (std::size_t i = 0; i < value.size(); ++i) n.value.data[i] = T(value.data[i]);
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::slice(NodeId x, std::size_t offset, Shape shape) {
  const auto& src = value(x);
  const std::size_t len = numel(shape);
  require(offset + len <= src.size(), "slice", "block exceeds input");
  Node n;
  n.op = OpKind::Slice;
  n.inputs = {x};
  n.offset = offset;
  n.value = BasicTensor<T>(std::move(shape));
  std::copy_n(src.data.begin() + static_cast<std::ptrdiff_t>(offset), len, n.value.data.begin());
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::matmul(NodeId a, NodeId b) {
  const auto& A = value(a);
  const auto& B = value(b);
  require(A.shape.size() == 2 && B.shape.size() == 2, "matmul", "operands must be 2-D");
  require(A.shape[1] == B.shape[0], "matmul",
          "inner dimensions differ: " + shape_string(A.shape) + " x " + shape_string(B.shape));
  const std::size_t m = A.shape[0], k = A.shape[1], p = B.shape[1];
  Node n;
  n.op = OpKind::MatMul;
  n.inputs = {a, b};
  n.value = BasicTensor<T>(Shape{m, p});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      T acc(0.0);
      for (std::size_t r = 0; r < k; ++r) acc += A.data[i * k + r] * B.data[r * p + j];
      n.value.data[i * p + j] = acc;
    }
  }
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::add_row_bias(NodeId x, NodeId bias) {
  const auto& X = value(x);
  const auto& b = value(bias);
  require(X.shape.size() == 2 && b.size() == X.shape[1], "add_row_bias", "bias width mismatch");
  Node n;
  n.op = OpKind::AddRowBias;
  n.inputs = {x, bias};
  n.value = X;
  const std::size_t cols = X.shape[1];
  for (std::size_t i = 0; i < X.shape[0]; ++i) {
    for (std::size_t j = 0; j < cols; ++j) n.value.data[i * cols + j] += b.data[j];
  }
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::add(NodeId a, NodeId b) {
  require(value(a).size() == value(b).size(), "add", "size mismatch");
  Node n;
  n.op = OpKind::Add;
  n.inputs = {a, b};
  n.value = value(a);
  const auto& B = value(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value.data[i] += B.data[i];
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::sub(NodeId a, NodeId b) {
  require(value(a).size() == value(b).size(), "sub", "size mismatch");
  Node n;
  n.op = OpKind::Sub;
  n.inputs = {a, b};
  n.value = value(a);
  const auto& B = value(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value.data[i] -= B.data[i];
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::mul(NodeId a, NodeId b) {
  require(value(a).size() == value(b).size(), "mul", "size mismatch");
  Node n;
  n.op = OpKind::Mul;
  n.inputs = {a, b};
  n.value = value(a);
  const auto& B = value(b);
  for (std::size_t i = 0; i < n.value.size(); ++i) n.value.data[i] *= B.data[i];
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::scale(NodeId a, double s) {
  Node n;
  n.op = OpKind::Scale;
  n.inputs = {a};
  n.scalar = s;
  n.value = value(a);
  for (auto& v : n.value.data) v = v * s;
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::pow_int(NodeId a, int k) {
  require(k >= 1, "pow_int", "exponent must be >= 1");
  Node n;
  n.op = OpKind::PowInt;
  n.inputs = {a};
  n.exponent = k;
  n.value = value(a);
  for (auto& v : n.value.data) v = ipow(v, k);
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::sum(NodeId a) {
  Node n;
  n.op = OpKind::Sum;
  n.inputs = {a};
  n.value = BasicTensor<T>(Shape{1});
  T acc(0.0);
  for (const auto& v : value(a).data) acc += v;
  n.value.data[0] = acc;
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::gelu(NodeId a) {
  Node n;
  n.op = OpKind::Gelu;
  n.inputs = {a};
  n.value = value(a);
  for (auto& v : n.value.data) v = gelu_value(v);
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::relu(NodeId a) {
  Node n;
  n.op = OpKind::Relu;
  n.inputs = {a};
  n.value = value(a);
  for (auto& v : n.value.data) {
    if (!(primal(v) > 0.0)) v = T(0.0);
  }
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::softmax_cross_entropy(NodeId logits, std::span<const int> labels) {
  using std::exp;
  using std::log;
  const auto& Z = value(logits);
  require(Z.shape.size() == 2, "softmax_cross_entropy", "logits must be 2-D");
  const std::size_t m = Z.shape[0], k = Z.shape[1];
  require(labels.size() == m, "softmax_cross_entropy", "one label per row required");
  Node n;
  n.op = OpKind::SoftmaxCrossEntropy;
  n.inputs = {logits};
  n.labels.assign(labels.begin(), labels.end());
  n.saved = BasicTensor<T>(Shape{m, k});
  T total(0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const int y = labels[i];
    require(y >= 0 && static_cast<std::size_t>(y) < k, "softmax_cross_entropy", "label out of range");
    double shift = primal(Z.data[i * k]);
    for (std::size_t j = 1; j < k; ++j) shift = std::max(shift, primal(Z.data[i * k + j]));
    T denom(0.0);
    for (std::size_t j = 0; j < k; ++j) {
      const T e = exp(Z.data[i * k + j] - shift);
      n.saved.data[i * k + j] = e;
      denom += e;
    }
    for (std::size_t j = 0; j < k; ++j) n.saved.data[i * k + j] = n.saved.data[i * k + j] / denom;
    total += log(denom) - (Z.data[i * k + static_cast<std::size_t>(y)] - shift);
  }
  n.value = BasicTensor<T>(Shape{1});
  n.value.data[0] = total / static_cast<double>(m);
  return push(std::move(n));
}

template <class T>
NodeId Tape<T>::mean_squared_error(NodeId prediction, NodeId target) {
  const auto& P = value(prediction);
  const auto& Y = value(target);
  require(P.size() == Y.size(), "mean_squared_error", "prediction/target size mismatch");
  Node n;
  n.op = OpKind::MeanSquaredError;
  n.inputs = {prediction, target};
  T total(0.0);
  for (std::size_t i = 0; i < P.size(); ++i) {
    const T r = P.data[i] - Y.data[i];
    total += r * r;
  }
  n.value = BasicTensor<T>(Shape{1});
  n.value.data[0] = total / (2.0 * static_cast<double>(P.rows()));
  return push(std::move(n));
}

template <class T>
std::vector<BasicTensor<T>> Tape<T>::backward(NodeId output) const {
  require(output < nodes_.size(), "backward", "unknown output node");
  require(value(output).size() == 1, "backward", "output must be a scalar");
  std::vector<BasicTensor<T>> adj(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].needs_grad) adj[i] = BasicTensor<T>(nodes_[i].value.shape);
  }
  adj[output].data[0] = adj[output].data[0] + 1.0;

  for (std::size_t id = output + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.needs_grad) continue;
    const BasicTensor<T>& g = adj[id];
    auto wants = [&](std::size_t slot) { return nodes_[n.inputs[slot]].needs_grad; };
    switch (n.op) {
      case OpKind::Leaf:
      case OpKind::Constant:
        break;
      case OpKind::Slice: {
        auto& dst = adj[n.inputs[0]].data;
        for (std::size_t i = 0; i < g.size(); ++i) dst[n.offset + i] += g.data[i];
        break;
      }
      case OpKind::MatMul: {
        const auto& A = value(n.inputs[0]);
        const auto& B = value(n.inputs[1]);
        const std::size_t m = A.shape[0], k = A.shape[1], p = B.shape[1];
        if (wants(0)) {
          auto& dA = adj[n.inputs[0]].data;
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t r = 0; r < k; ++r) {
              T acc(0.0);
              for (std::size_t j = 0; j < p; ++j) acc += g.data[i * p + j] * B.data[r * p + j];
              dA[i * k + r] += acc;
            }
        }
        if (wants(1)) {
          auto& dB = adj[n.inputs[1]].data;
          for (std::size_t r = 0; r < k; ++r)
            for (std::size_t j = 0; j < p; ++j) {
              T acc(0.0);
              for (std::size_t i = 0; i < m; ++i) acc += A.data[i * k + r] * g.data[i * p + j];
              dB[r * p + j] += acc;
            }
        }
        break;
      }
      case OpKind::AddRowBias: {
        const std::size_t cols = g.shape[1];
        if (wants(0)) {
          auto& dX = adj[n.inputs[0]].data;
          for (std::size_t i = 0; i < g.size(); ++i) dX[i] += g.data[i];
        }
        if (wants(1)) {
          auto& db = adj[n.inputs[1]].data;
          for (std::size_t i = 0; i < g.shape[0]; ++i)
            for (std::size_t j = 0; j < cols; ++j) db[j] += g.data[i * cols + j];
        }
        break;
      }
      case OpKind::Add:
      case OpKind::Sub: {
        const double sign_b = n.op == OpKind::Add ? 1.0 : -1.0;
        if (wants(0)) {
          auto& d0 = adj[n.inputs[0]].data;
          for (std::size_t i = 0; i < g.size(); ++i) d0[i] += g.data[i];
        }
        if (wants(1)) {
          auto& d1 = adj[n.inputs[1]].data;
          for (std::size_t i = 0; i < g.size(); ++i) d1[i] += sign_b * g.data[i];
        }
        break;
      }
      case OpKind::Mul: {
        const auto& A = value(n.inputs[0]);
        const auto& B = value(n.inputs[1]);
        if (wants(0)) {
          auto& d0 = adj[n.inputs[0]].data;
          for (std::size_t i = 0; i < g.size(); ++i) d0[i] += g.data[i] * B.data[i];
        }
        if (wants(1)) {
          auto& d1 = adj[n.inputs[1]].data;
          for (std::size_t i = 0; i < g.size(); ++i) d1[i] += g.data[i] * A.data[i];
        }
        break;
      }
      case OpKind::Scale: {
        auto& d0 = adj[n.inputs[0]].data;
        for (std::size_t i = 0; i < g.size(); ++i) d0[i] += g.data[i] * n.scalar;
        break;
      }
      case OpKind::PowInt: {
        const auto& X = value(n.inputs[0]);
        auto& d0 = adj[n.inputs[0]].data;
        for (std::size_t i = 0; i < g.size(); ++i) {
          d0[i] += g.data[i] * (static_cast<double>(n.exponent) * ipow(X.data[i], n.exponent - 1));
        }
        break;
      }
      case OpKind::Sum: {
        auto& d0 = adj[n.inputs[0]].data;
        for (auto& v : d0) v += g.data[0];
        break;
      }
      case OpKind::Gelu: {
        const auto& Z = value(n.inputs[0]);
        auto& d0 = adj[n.inputs[0]].data;
        for (std::size_t i = 0; i < g.size(); ++i) d0[i] += g.data[i] * gelu_slope(Z.data[i]);
        break;
      }
      case OpKind::Relu: {
        const auto& Z = value(n.inputs[0]);
        auto& d0 = adj[n.inputs[0]].data;
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (primal(Z.data[i]) > 0.0) d0[i] += g.data[i];
        }
        break;
      }
      case OpKind::SoftmaxCrossEntropy: {
        const std::size_t m = n.saved.shape[0], k = n.saved.shape[1];
        const T upstream = g.data[0] / static_cast<double>(m);
        auto& d0 = adj[n.inputs[0]].data;
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            T p = n.saved.data[i * k + j];
            if (static_cast<int>(j) == n.labels[i]) p = p - 1.0;
            d0[i * k + j] += upstream * p;
          }
        }
        break;
      }
      case OpKind::MeanSquaredError: {
        const auto& P = value(n.inputs[0]);
        const auto& Y = value(n.inputs[1]);
        const T upstream = g.data[0] / static_cast<double>(P.rows());
        if (wants(0)) {
          auto& d0 = adj[n.inputs[0]].data;
          for (std::size_t i = 0; i < P.size(); ++i) d0[i] += upstream * (P.data[i] - Y.data[i]);
        }
        if (wants(1)) {
          auto& d1 = adj[n.inputs[1]].data;
          for (std::size_t i = 0; i < P.size(); ++i) d1[i] -= upstream * (P.data[i] - Y.data[i]);
        }
        break;
      }
    }
  }
  return adj;
}

template <class T>
BasicTensor<T> Tape<T>::gradient(NodeId output, NodeId wrt) const {
  auto adj = backward(output);
  if (!nodes_.at(wrt).needs_grad) return BasicTensor<T>(nodes_[wrt].value.shape);
  return std::move(adj[wrt]);
}

template class Tape<double>;
template class Tape<Dual1>;
template class Tape<Dual2>;

}  // namespace samlab
