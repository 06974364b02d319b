#include "samlab/loss_oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "samlab/errors.hpp"

namespace samlab {

namespace {

const std::shared_ptr<const Batch>& empty_batch() {
  static const auto batch = std::make_shared<const Batch>();
  return batch;
}

template <class T>
ParamVector extract(const BasicTensor<T>& g, const std::shared_ptr<const ParamLayout>& layout,
                    double (*pick)(const T&)) {
  ParamVector out(layout);
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = pick(g.data[i]);
  return out;
}

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw NonFiniteLoss(std::string(what) + " is not finite");
}

void require_finite(const ParamVector& v, const char* what) {
  if (!v.all_finite()) throw NonFiniteLoss(std::string(what) + " has non-finite entries");
}

}  // namespace

LossOracle::LossOracle(std::shared_ptr<const Model> model, std::shared_ptr<const Batch> batch,
                       DerivativeMode mode, double eps0, double eps_third)
    : model_(std::move(model)),
      batch_(batch ? std::move(batch) : empty_batch()),
      mode_(mode),
      eps0_(eps0),
      eps_third_(eps_third) {
  if (!model_) throw std::invalid_argument("LossOracle needs a model");
  if (!(eps0_ > 0.0) || !(eps_third_ > 0.0)) {
    throw std::invalid_argument("finite-difference scales must be positive");
  }
}

LossOracle LossOracle::with_mode(DerivativeMode mode) const {
  return LossOracle(model_, batch_, mode, eps0_, eps_third_);
}

void LossOracle::check_layout(const ParamVector& x) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("parameter length " + std::to_string(x.size()) +
                                " does not match model dimension " + std::to_string(dim()));
  }
}

double LossOracle::fd_step(const ParamVector& x, double eps) const {
  return eps * (1.0 + x.norm());
}

Tape<double> LossOracle::record(const ParamVector& x) const {
  check_layout(x);
  Tape<double> tape;
  const NodeId p = tape.leaf(Tensor(Shape{x.size()}, x.values()));
  model_->build(tape, p, *batch_);
  return tape;
}

double LossOracle::loss(const ParamVector& x) const {
  check_layout(x);
  Tape<double> tape;
  const NodeId p = tape.leaf(Tensor(Shape{x.size()}, x.values()));
  const double f = tape.value(model_->build(tape, p, *batch_)).data[0];
  require_finite(f, "loss");
  return f;
}

std::pair<double, ParamVector> LossOracle::loss_and_grad(const ParamVector& x) const {
  check_layout(x);
  Tape<double> tape;
  const NodeId p = tape.leaf(Tensor(Shape{x.size()}, x.values()));
  const NodeId out = model_->build(tape, p, *batch_);
  const double f = tape.value(out).data[0];
  require_finite(f, "loss");
  ParamVector g(x.layout(), tape.gradient(out, p).data);
  require_finite(g, "gradient");
  return {f, std::move(g)};
}

ParamVector LossOracle::grad(const ParamVector& x) const { return loss_and_grad(x).second; }

ParamVector LossOracle::hvp_exact(const ParamVector& x, const ParamVector& v) const {
  check_layout(x);
  check_layout(v);
  BasicTensor<Dual1> seed(Shape{x.size()});
  for (std::size_t i = 0; i < x.size(); ++i) seed.data[i] = Dual1(x[i], v[i]);
  Tape<Dual1> tape;
  const NodeId p = tape.leaf(std::move(seed));
  const NodeId out = model_->build(tape, p, *batch_);
  require_finite(tape.value(out).data[0].v, "loss");
  ParamVector hv = extract<Dual1>(tape.gradient(out, p), x.layout(),
                                  [](const Dual1& a) { return a.d; });
  require_finite(hv, "Hessian-vector product");
  return hv;
}

ParamVector LossOracle::hvp(const ParamVector& x, const ParamVector& v) const {
  if (mode_ == DerivativeMode::Exact) return hvp_exact(x, v);
  check_layout(x);
  check_layout(v);
  const double nv = v.norm();
  if (nv == 0.0) throw ZeroDirection("finite-difference HVP along the zero vector");
  const double h = fd_step(x, eps0_);
  const ParamVector dir = (1.0 / nv) * v;
  ParamVector plus = x;
  plus.axpy(h, dir);
  ParamVector minus = x;
  minus.axpy(-h, dir);
  ParamVector out = grad(plus) - grad(minus);
  out *= nv / (2.0 * h);
  return out;
}

double LossOracle::curvature_along(const ParamVector& x, const ParamVector& u) const {
  return u.dot(hvp_exact(x, u));
}

ParamVector LossOracle::third_directional(const ParamVector& x, const ParamVector& u) const {
  check_layout(x);
  check_layout(u);
  if (u.norm() == 0.0) throw ZeroDirection("third-order derivative along the zero vector");
  if (mode_ == DerivativeMode::Exact) {
    // Seed x + e1 u + e2 u; the e1 e2 coefficient of the gradient is grad^3 f (u, u).
    BasicTensor<Dual2> seed(Shape{x.size()});
    for (std::size_t i = 0; i < x.size(); ++i) {
      seed.data[i] = Dual2(Dual1(x[i], u[i]), Dual1(u[i], 0.0));
    }
    Tape<Dual2> tape;
    const NodeId p = tape.leaf(std::move(seed));
    const NodeId out = model_->build(tape, p, *batch_);
    require_finite(tape.value(out).data[0].v.v, "loss");
    ParamVector t = extract<Dual2>(tape.gradient(out, p), x.layout(),
                                   [](const Dual2& a) { return a.d.d; });
    require_finite(t, "third-order derivative");
    return t;
  }
  if (x.size() > kDenseProbeLimit) {
    throw DimensionTooLarge("dense third-order probes need d <= " +
                            std::to_string(kDenseProbeLimit) + ", got " +
                            std::to_string(x.size()));
  }
  const double h = fd_step(x, eps_third_);
  ParamVector out(x.layout());
  for (std::size_t i = 0; i < x.size(); ++i) {
    ParamVector plus = x;
    plus[i] += h;
    ParamVector minus = x;
    minus[i] -= h;
    out[i] = (curvature_along(plus, u) - curvature_along(minus, u)) / (2.0 * h);
  }
  require_finite(out, "third-order derivative");
  return out;
}

double LossOracle::third_directional_along(const ParamVector& x, const ParamVector& u,
                                           const ParamVector& w) const {
  check_layout(x);
  check_layout(u);
  check_layout(w);
  if (u.norm() == 0.0) throw ZeroDirection("third-order derivative along the zero vector");
  if (mode_ == DerivativeMode::Exact) return w.dot(third_directional(x, u));
  const double nw = w.norm();
  if (nw == 0.0) return 0.0;
  const double h = fd_step(x, eps_third_);
  const ParamVector dir = (1.0 / nw) * w;
  ParamVector plus = x;
  plus.axpy(h, dir);
  ParamVector minus = x;
  minus.axpy(-h, dir);
  const double t = (curvature_along(plus, u) - curvature_along(minus, u)) / (2.0 * h) * nw;
  require_finite(t, "third-order derivative");
  return t;
}

}  // namespace samlab
