#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>

#include "json.hpp"
#include "samlab/config.hpp"
#include "samlab/dataset.hpp"
#include "samlab/loss_oracle.hpp"
#include "samlab/metrics.hpp"
#include "samlab/mlp.hpp"
#include "samlab/optimizers.hpp"

namespace samlab {

// Model and data resolved from a config.
struct Problem {
  MlpSpec spec;
  std::shared_ptr<const Mlp> model;
  Dataset train;
  Dataset test;
  DerivativeMode mode = DerivativeMode::Exact;
};

MlpSpec model_spec(const Config& cfg);
Problem build_problem(const Config& cfg);
OptimizerConfig optimizer_config(const Config& cfg, std::uint64_t seed);
// Step budget of a training run; doubled for SGD when fair_compute is set.
std::size_t train_steps(const Config& cfg);

// Trains from init_params(spec, seed) for `steps` optimizer steps.
ParamVector train_to(const Problem& problem, const Config& cfg, std::uint64_t seed,
                     std::size_t steps);

// Metrics CSV for every seed: rows at steps 0, eval_every, ... and the last
// step, each describing the iterate before that step's update. On a numeric
// failure an "# error=..." line is written and the exception rethrown.
void run_train(const Config& cfg, std::ostream& csv);

// Discrete SAM (a uniformly drawn partition block per step) and the requested
// SDE processes from the same initialization, in the same CSV schema.
void run_simulate_sde(const Config& cfg, std::ostream& csv);

nlohmann::json run_spectrum(const Config& cfg);
nlohmann::json run_probe_moments(const Config& cfg);
nlohmann::json run_probe_power(const Config& cfg);
nlohmann::json run_bound(const Config& cfg);
nlohmann::json run_align_range(const Config& cfg);

// Analytic moment-probe problems: "quartic" (x^4/4 at x = 1), "quadratic"
// (x^2/2 at x = 1), and "toy2", a two-parameter, two-batch polynomial at
// (1, 0.5) with cubic and quartic terms.
OracleFamily analytic_family(const std::string& problem);
ParamVector analytic_point(const std::string& problem);

}  // namespace samlab
