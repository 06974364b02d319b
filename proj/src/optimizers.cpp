#include "samlab/optimizers.hpp"

#include <cmath>
#include <numbers>

#include "samlab/errors.hpp"
#include "samlab/hessian.hpp"

namespace samlab {

Method parse_method(const std::string& name) {
  if (name == "sgd") return Method::Sgd;
  if (name == "sam") return Method::Sam;
  if (name == "eigensam") return Method::EigenSam;
  if (name == "reversesam") return Method::ReverseSam;
  if (name == "egr") return Method::Egr;
  throw ConfigError("unknown method '" + name + "' (expected sgd|sam|eigensam|reversesam|egr)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Sgd: return "sgd";
    case Method::Sam: return "sam";
    case Method::EigenSam: return "eigensam";
    case Method::ReverseSam: return "reversesam";
    case Method::Egr: return "egr";
  }
  return "?";
}

Schedule parse_schedule(const std::string& name) {
  if (name == "constant") return Schedule::Constant;
  if (name == "cosine") return Schedule::Cosine;
  throw ConfigError("unknown schedule '" + name + "' (expected constant|cosine)");
}

std::string to_string(Schedule s) { return s == Schedule::Constant ? "constant" : "cosine"; }

void OptimizerConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(rho >= 0.0)) throw ConfigError("rho must be >= 0");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (p < 1) throw ConfigError("refresh interval p must be >= 1");
  if (q < 1) throw ConfigError("power iteration count q must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  if (!(grad_floor > 0.0)) throw ConfigError("gradient floor must be > 0");
  if (schedule == Schedule::Cosine && total_steps == 0) {
    throw ConfigError("cosine schedule needs total_steps >= 1");
  }
}

double learning_rate(const OptimizerConfig& cfg, std::uint64_t k) {
  if (cfg.schedule == Schedule::Constant) return cfg.lr;
  const double frac = static_cast<double>(k) / static_cast<double>(cfg.total_steps);
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

ParamVector sam_perturbation(const ParamVector& g, double tau) {
  const double n = g.norm();
  if (!(n >= tau)) return g.zeros_like();
  return (1.0 / n) * g;
}

ParamVector eigen_sam_perturbation(const ParamVector& g, const ParamVector& v, double alpha,
                                   double tau) {
  const double n = g.norm();
  if (!(n >= tau)) return g.zeros_like();
  const ParamVector gh = (1.0 / n) * g;
  ParamVector perp = v;
  perp.axpy(-v.dot(gh), gh);
  const double s = g.dot(v) >= 0.0 ? 1.0 : -1.0;
  ParamVector out = gh;
  out.axpy(alpha * s, perp);
  return out;
}

namespace {

void require_method(const OptimizerConfig& cfg, Method m) {
  if (cfg.method != m) {
    throw ConfigError("step function for " + to_string(m) + " called with method=" +
                      to_string(cfg.method));
  }
}

// Applies decay, momentum and the scheduled step to a descent direction.
StepResult finish(const ParamVector& x, const OptimizerConfig& cfg, OptimizerState state,
                  ParamVector direction, double loss, ParamVector g, ParamVector pert) {
  if (cfg.weight_decay != 0.0) direction.axpy(cfg.weight_decay, x);
  if (cfg.momentum != 0.0) {
    if (state.momentum) {
      *state.momentum *= cfg.momentum;
      *state.momentum += direction;
    } else {
      state.momentum = direction;
    }
    direction = *state.momentum;
  }
  ParamVector next = x;
  next.axpy(-learning_rate(cfg, state.step), direction);
  state.step += 1;
  return StepResult{std::move(next), std::move(state), loss, std::move(g), std::move(pert)};
}

StepResult perturbed_step(const ParamVector& x, const LossOracle& oracle,
                          const OptimizerConfig& cfg, OptimizerState state, double loss,
                          ParamVector g, ParamVector pert) {
  ParamVector direction = g;
  if (cfg.rho != 0.0 && pert.norm() > 0.0) {
    ParamVector probe = x;
    probe.axpy(cfg.rho, pert);
    direction = oracle.grad(probe);
  }
  return finish(x, cfg, std::move(state), std::move(direction), loss, std::move(g),
                std::move(pert));
}

}  // namespace

StepResult sgd_step(const ParamVector& x, const LossOracle& oracle, const OptimizerConfig& cfg,
                    const OptimizerState& state) {
  require_method(cfg, Method::Sgd);
  auto [f, g] = oracle.loss_and_grad(x);
  ParamVector direction = g;
  return finish(x, cfg, state, std::move(direction), f, std::move(g), x.zeros_like());
}

StepResult sam_step(const ParamVector& x, const LossOracle& oracle, const OptimizerConfig& cfg,
                    const OptimizerState& state) {
  require_method(cfg, Method::Sam);
  auto [f, g] = oracle.loss_and_grad(x);
  ParamVector pert = sam_perturbation(g, cfg.grad_floor);
  return perturbed_step(x, oracle, cfg, state, f, std::move(g), std::move(pert));
}

StepResult reverse_sam_step(const ParamVector& x, const LossOracle& oracle,
                            const OptimizerConfig& cfg, const OptimizerState& state) {
  require_method(cfg, Method::ReverseSam);
  auto [f, g] = oracle.loss_and_grad(x);
  ParamVector pert = -sam_perturbation(g, cfg.grad_floor);
  return perturbed_step(x, oracle, cfg, state, f, std::move(g), std::move(pert));
}

StepResult eigen_sam_step(const ParamVector& x, const LossOracle& oracle,
                          const OptimizerConfig& cfg, const OptimizerState& state) {
  require_method(cfg, Method::EigenSam);
  OptimizerState next = state;
  const std::uint64_t t1 = state.step + 1;
  // With alpha = 0 the eigenvector cannot affect the step, so it is not computed.
  if (cfg.alpha != 0.0 && (t1 - 1) % cfg.p == 0) {
    const LinearOperator op = hessian_operator(oracle, x);
    EigenEstimate est =
        power_iteration(op, cfg.q, random_unit(x.layout(), cfg.seed, t1), cfg.power_shift);
    next.hvp_count += est.hvp_calls;
    next.eigenvector = std::move(est.vector);
    next.eigenvalue = est.value;
  }
  auto [f, g] = oracle.loss_and_grad(x);
  ParamVector pert = next.eigenvector
                         ? eigen_sam_perturbation(g, *next.eigenvector, cfg.alpha, cfg.grad_floor)
                         : sam_perturbation(g, cfg.grad_floor);
  return perturbed_step(x, oracle, cfg, std::move(next), f, std::move(g), std::move(pert));
}

StepResult egr_step(const ParamVector& x, const LossOracle& oracle, const OptimizerConfig& cfg,
                    const OptimizerState& state) {
  require_method(cfg, Method::Egr);
  OptimizerState next = state;
  auto [f, g] = oracle.loss_and_grad(x);
  ParamVector direction = g;
  const double n = g.norm();
  if (cfg.rho != 0.0 && n >= cfg.grad_floor) {
    direction.axpy(cfg.rho / n, oracle.hvp(x, g));
    next.hvp_count += 1;
  }
  ParamVector pert = sam_perturbation(g, cfg.grad_floor);
  return finish(x, cfg, std::move(next), std::move(direction), f, std::move(g), std::move(pert));
}

StepResult step(const ParamVector& x, const LossOracle& oracle, const OptimizerConfig& cfg,
                const OptimizerState& state) {
  switch (cfg.method) {
    case Method::Sgd: return sgd_step(x, oracle, cfg, state);
    case Method::Sam: return sam_step(x, oracle, cfg, state);
    case Method::EigenSam: return eigen_sam_step(x, oracle, cfg, state);
    case Method::ReverseSam: return reverse_sam_step(x, oracle, cfg, state);
    case Method::Egr: return egr_step(x, oracle, cfg, state);
  }
  throw ConfigError("unknown optimizer method");
}

}  // namespace samlab
