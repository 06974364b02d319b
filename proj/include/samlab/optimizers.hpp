#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "samlab/loss_oracle.hpp"
#include "samlab/param_vector.hpp"

namespace samlab {

enum class Method { Sgd, Sam, EigenSam, ReverseSam, Egr };
enum class Schedule { Constant, Cosine };

Method parse_method(const std::string& name);
std::string to_string(Method m);
Schedule parse_schedule(const std::string& name);
std::string to_string(Schedule s);

struct OptimizerConfig {
  Method method = Method::Sam;
  double lr = 0.1;
  double rho = 0.05;
  double alpha = 0.2;
  std::size_t p = 100;  // eigenvector refresh interval
  std::size_t q = 5;    // power iterations per refresh
  double momentum = 0.0;
  double weight_decay = 0.0;
  Schedule schedule = Schedule::Constant;
  std::size_t total_steps = 0;  // cosine horizon
  double grad_floor = 1e-12;
  double power_shift = 0.0;     // Eigen-SAM power iteration on H + shift I
  std::uint64_t seed = 0;       // power-iteration starts

  // Throws ConfigError unless lr > 0, rho >= 0, alpha >= 0, p >= 1, q >= 1,
  // 0 <= momentum < 1, grad_floor > 0, and a cosine schedule has a horizon.
  void validate() const;
};

struct OptimizerState {
  std::uint64_t step = 0;  // completed steps; the next step is t1 = step + 1
  std::optional<ParamVector> momentum;
  std::optional<ParamVector> eigenvector;  // unit norm
  std::optional<double> eigenvalue;
  std::size_t hvp_count = 0;
};

struct StepResult {
  ParamVector x;
  OptimizerState state;
  double loss = 0.0;        // f_gamma at the pre-step iterate
  ParamVector gradient;     // raw mini-batch gradient at the pre-step iterate
  ParamVector perturbation; // unit-scale direction; rho * perturbation is epsilon
};

// eta * 1/2 (1 + cos(pi k / T)) for the cosine schedule, eta otherwise.
double learning_rate(const OptimizerConfig& cfg, std::uint64_t k);

// g/|g|, or zero when |g| < tau.
ParamVector sam_perturbation(const ParamVector& g, double tau = 1e-12);
// With g_hat = g/|g| and v_perp = v - <v, g_hat> g_hat:
// g_hat + alpha * sign(<g, v>) * v_perp, sign(0) = +1; zero when |g| < tau.
ParamVector eigen_sam_perturbation(const ParamVector& g, const ParamVector& v, double alpha,
                                   double tau = 1e-12);

// Each step evaluates the oracle (one mini-batch) at x and returns the next
// iterate. The update is buf = mu * buf + (direction + w * x), x' = x - eta_t * buf.
StepResult sgd_step(const ParamVector& x, const LossOracle& oracle, const OptimizerConfig& cfg,
                    const OptimizerState& state);
StepResult sam_step(const ParamVector& x, const LossOracle& oracle, const OptimizerConfig& cfg,
                    const OptimizerState& state);
// Refreshes the eigenvector by q power iterations on the oracle's Hessian at
// steps t1 = 1, p + 1, 2p + 1, ..., costing q + 2 HVPs each time. With
// alpha = 0 no eigenvector is computed and the step equals sam_step.
StepResult eigen_sam_step(const ParamVector& x, const LossOracle& oracle,
                          const OptimizerConfig& cfg, const OptimizerState& state);
StepResult reverse_sam_step(const ParamVector& x, const LossOracle& oracle,
                            const OptimizerConfig& cfg, const OptimizerState& state);
// Direction g + rho * H g / |g|, one HVP per step.
StepResult egr_step(const ParamVector& x, const LossOracle& oracle, const OptimizerConfig& cfg,
                    const OptimizerState& state);

// Dispatches on cfg.method.
StepResult step(const ParamVector& x, const LossOracle& oracle, const OptimizerConfig& cfg,
                const OptimizerState& state);

}  // namespace samlab
