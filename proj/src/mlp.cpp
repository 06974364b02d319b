#include "samlab/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "samlab/errors.hpp"
#include "samlab/rng.hpp"

namespace samlab {

Activation parse_activation(const std::string& name) {
  if (name == "gelu") return Activation::Gelu;
  if (name == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + name + "' (expected gelu|relu)");
}

LossHead parse_loss_head(const std::string& name) {
  if (name == "xent" || name == "softmax-cross-entropy") return LossHead::SoftmaxCrossEntropy;
  if (name == "mse" || name == "mean-squared-error") return LossHead::MeanSquaredError;
  throw ConfigError("unknown loss head '" + name + "' (expected xent|mse)");
}

std::string to_string(Activation a) { return a == Activation::Gelu ? "gelu" : "relu"; }
std::string to_string(LossHead h) {
  return h == LossHead::SoftmaxCrossEntropy ? "xent" : "mse";
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ConfigError("an MLP needs at least input and output widths");
  for (std::size_t w : widths) {
    if (w < 1) throw ConfigError("MLP widths must be >= 1");
  }
}

std::size_t MlpSpec::param_count() const {
  std::size_t d = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) d += widths[l] * widths[l + 1] + widths[l + 1];
  return d;
}

namespace {

std::shared_ptr<const ParamLayout> mlp_layout(const MlpSpec& spec) {
  std::vector<std::pair<std::string, Shape>> blocks;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::string tag = std::to_string(l + 1);
    blocks.emplace_back("W" + tag, Shape{spec.widths[l], spec.widths[l + 1]});
    blocks.emplace_back("b" + tag, Shape{spec.widths[l + 1]});
  }
  return std::make_shared<const ParamLayout>(blocks);
}

}  // namespace

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  layout_ = mlp_layout(spec_);
}

template <class T>
NodeId Mlp::logits(Tape<T>& tape, NodeId params, NodeId inputs) const {
  NodeId h = inputs;
  const auto& entries = layout_->entries();
  const std::size_t layers = spec_.widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& w = entries[2 * l];
    const auto& b = entries[2 * l + 1];
    const NodeId wn = tape.slice(params, w.offset, w.shape);
    const NodeId bn = tape.slice(params, b.offset, b.shape);
    h = tape.add_row_bias(tape.matmul(h, wn), bn);
    if (l + 1 < layers) {
      h = spec_.activation == Activation::Gelu ? tape.gelu(h) : tape.relu(h);
    }
  }
  return h;
}

template <class T>
NodeId Mlp::forward(Tape<T>& tape, NodeId params, const Batch& batch) const {
  if (batch.rows() == 0) throw EmptyDataset("MLP loss on an empty batch");
  if (batch.inputs.cols() != spec_.widths.front()) {
    throw std::invalid_argument("batch input width does not match the MLP input layer");
  }
  const NodeId x = tape.constant(batch.inputs);
  const NodeId out = logits(tape, params, x);
  if (spec_.head == LossHead::SoftmaxCrossEntropy) {
    return tape.softmax_cross_entropy(out, batch.labels);
  }
  return tape.mean_squared_error(out, tape.constant(batch.targets));
}

Tensor Mlp::predict(const ParamVector& x, const Tensor& inputs) const {
  Tape<double> tape;
  const NodeId params = tape.leaf(Tensor(Shape{x.size()}, x.values()));
  const NodeId out = logits(tape, params, tape.constant(inputs));
  return tape.value(out);
}

template NodeId Mlp::forward(Tape<double>&, NodeId, const Batch&) const;
template NodeId Mlp::forward(Tape<Dual1>&, NodeId, const Batch&) const;
template NodeId Mlp::forward(Tape<Dual2>&, NodeId, const Batch&) const;

ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto layout = mlp_layout(spec);
  ParamVector x(layout);
  Rng rng(seed, Stream::Init);
  for (const auto& e : layout->entries()) {
    if (e.shape.size() != 2) continue;  // biases stay zero
    const double fan_in = static_cast<double>(e.shape[0]);
    const double fan_out = static_cast<double>(e.shape[1]);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < numel(e.shape); ++i) x[e.offset + i] = rng.uniform(-bound, bound);
  }
  return x;
}

}  // namespace samlab
