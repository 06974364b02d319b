#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "samlab/dual.hpp"
#include "samlab/param_vector.hpp"
#include "samlab/tape.hpp"
#include "samlab/tensor.hpp"

namespace samlab {

// Rows of a dataset that one loss evaluation sees.
struct Batch {
  Tensor inputs;                     // rows x input_dim
  std::vector<int> labels;           // softmax cross-entropy head
  Tensor targets;                    // rows x output_dim, mean-squared-error head
  std::vector<std::size_t> indices;  // source rows in the dataset

  std::size_t rows() const { return inputs.shape.empty() ? 0 : inputs.shape[0]; }
};

// A differentiable loss f(x; batch). build() records the loss on a tape whose
// parameter leaf is `params` and returns the scalar output node. It is
// provided for every scalar type the oracle differentiates with.
class Model {
 public:
  virtual ~Model() = default;

  virtual const std::shared_ptr<const ParamLayout>& layout() const = 0;

  virtual NodeId build(Tape<double>& tape, NodeId params, const Batch& batch) const = 0;
  virtual NodeId build(Tape<Dual1>& tape, NodeId params, const Batch& batch) const = 0;
  virtual NodeId build(Tape<Dual2>& tape, NodeId params, const Batch& batch) const = 0;
};

// Implements the three build() overloads by forwarding to
// Derived::forward<T>(tape, params, batch).
template <class Derived>
class ModelBase : public Model {
 public:
  NodeId build(Tape<double>& tape, NodeId params, const Batch& batch) const override {
    return self().forward(tape, params, batch);
  }
  NodeId build(Tape<Dual1>& tape, NodeId params, const Batch& batch) const override {
    return self().forward(tape, params, batch);
  }
  NodeId build(Tape<Dual2>& tape, NodeId params, const Batch& batch) const override {
    return self().forward(tape, params, batch);
  }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
};

}  // namespace samlab
