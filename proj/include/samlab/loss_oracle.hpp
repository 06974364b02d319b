#pragma once

#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "samlab/model.hpp"
#include "samlab/param_vector.hpp"
#include "samlab/tape.hpp"

namespace samlab {

enum class DerivativeMode { Exact, FiniteDifference };

// Loss of one model on one batch, with derivatives up to third order.
//
// Exact mode differentiates the recorded tape: reverse mode for the gradient,
// forward-over-reverse (dual numbers) for Hessian-vector products, and a
// doubly nested dual for third_directional. Finite-difference mode replaces
// the HVP by central differences of the gradient with h = eps0 (1 + |x|),
// and third_directional by central differences of s(x) = u^T H(x) u along
// probe directions with h = eps_third (1 + |x|), where s is evaluated with
// exact HVPs.
//
// All queries are pure: the same x returns bit-identical results.
class LossOracle {
 public:
  static constexpr std::size_t kDenseProbeLimit = 512;

  LossOracle(std::shared_ptr<const Model> model, std::shared_ptr<const Batch> batch,
             DerivativeMode mode = DerivativeMode::Exact, double eps0 = 1e-5,
             double eps_third = 1e-4);

  const Model& model() const { return *model_; }
  const std::shared_ptr<const Model>& model_ptr() const { return model_; }
  const Batch& batch() const { return *batch_; }
  const std::shared_ptr<const Batch>& batch_ptr() const { return batch_; }
  DerivativeMode mode() const { return mode_; }
  std::size_t dim() const { return model_->layout()->size(); }

  // Same model and batch under a different derivative mode.
  LossOracle with_mode(DerivativeMode mode) const;

  double loss(const ParamVector& x) const;
  ParamVector grad(const ParamVector& x) const;
  std::pair<double, ParamVector> loss_and_grad(const ParamVector& x) const;

  ParamVector hvp(const ParamVector& x, const ParamVector& v) const;
  // Forward-over-reverse product regardless of mode.
  ParamVector hvp_exact(const ParamVector& x, const ParamVector& v) const;

  // grad_x (u^T H(x) u) with u held fixed, i.e. the third derivative
  // contracted twice with u. Throws ZeroDirection when u = 0, and
  // DimensionTooLarge in finite-difference mode when d > kDenseProbeLimit.
  ParamVector third_directional(const ParamVector& x, const ParamVector& u) const;
  // w^T (grad_x u^T H(x) u): one probe direction, usable at any d.
  double third_directional_along(const ParamVector& x, const ParamVector& u,
                                 const ParamVector& w) const;

  // Forward pass recorded for inspection (determinism checks).
  Tape<double> record(const ParamVector& x) const;

 private:
  void check_layout(const ParamVector& x) const;
  double fd_step(const ParamVector& x, double eps) const;
  double curvature_along(const ParamVector& x, const ParamVector& u) const;

  std::shared_ptr<const Model> model_;
  std::shared_ptr<const Batch> batch_;
  DerivativeMode mode_;
  double eps0_;
  double eps_third_;
};

using OracleFamily = std::vector<LossOracle>;

}  // namespace samlab
