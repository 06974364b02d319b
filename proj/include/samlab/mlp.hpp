#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "samlab/model.hpp"

namespace samlab {

enum class Activation { Gelu, Relu };
enum class LossHead { SoftmaxCrossEntropy, MeanSquaredError };

Activation parse_activation(const std::string& name);
LossHead parse_loss_head(const std::string& name);
std::string to_string(Activation a);
std::string to_string(LossHead h);

struct MlpSpec {
  std::vector<std::size_t> widths;  // input, hidden..., output
  Activation activation = Activation::Gelu;
  LossHead head = LossHead::SoftmaxCrossEntropy;

  void validate() const;
  std::size_t param_count() const;
};

// Fully connected network. Layer l has weight "W<l>" of shape (fan_in, fan_out)
// applied as X * W, followed by bias "b<l>"; the activation follows every layer
// except the last.
class Mlp : public ModelBase<Mlp> {
 public:
  explicit Mlp(MlpSpec spec);

  const std::shared_ptr<const ParamLayout>& layout() const override { return layout_; }
  const MlpSpec& spec() const { return spec_; }

  template <class T>
  NodeId forward(Tape<T>& tape, NodeId params, const Batch& batch) const;

  // Output-layer values (pre-softmax) for each input row.
  Tensor predict(const ParamVector& x, const Tensor& inputs) const;

 private:
  template <class T>
  NodeId logits(Tape<T>& tape, NodeId params, NodeId inputs) const;

  MlpSpec spec_;
  std::shared_ptr<const ParamLayout> layout_;
};

// Glorot-uniform weights, U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))),
// zero biases; drawn from Rng(seed, Stream::Init).
ParamVector init_params(const MlpSpec& spec, std::uint64_t seed);

}  // namespace samlab
