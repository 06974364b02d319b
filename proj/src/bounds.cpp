#include "samlab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "samlab/errors.hpp"

namespace samlab {

double pac_bayes_constant() {
  return 1.0 + 2.0 * std::log(std::numbers::pi * std::numbers::pi / 6.0);
}

double pac_bayes_bound(const BoundInputs& in) {
  if (!(in.n >= 1.0)) throw DomainError("PAC-Bayes bound needs n >= 1");
  if (!(in.d >= 1.0)) throw DomainError("PAC-Bayes bound needs d >= 1");
  if (!(in.sigma > 0.0)) throw DomainError("PAC-Bayes bound needs sigma > 0");
  if (!(in.loss_bound > 0.0)) throw DomainError("PAC-Bayes bound needs L > 0");
  if (!(in.third_bound >= 0.0)) throw DomainError("PAC-Bayes bound needs C >= 0");
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw DomainError("PAC-Bayes bound needs delta in (0,1)");
  if (!(in.param_norm >= 0.0)) throw DomainError("PAC-Bayes bound needs |x| >= 0");
  if (!std::isfinite(in.empirical_loss) || !std::isfinite(in.lambda1)) {
    throw DomainError("PAC-Bayes bound needs finite f_S and lambda1");
  }
  const double d = in.d, s2 = in.sigma * in.sigma;
  const double curvature = 0.5 * d * s2 * in.lambda1;
  const double cubic = in.third_bound * d * d * d * s2 * in.sigma / 6.0;
  const double complexity = d * std::log1p(in.param_norm * in.param_norm / (d * s2)) +
                            pac_bayes_constant() + 2.0 * std::log(1.0 / in.delta) +
                            4.0 * std::log(in.n + d);
  return in.empirical_loss + curvature + cubic +
         in.loss_bound / (2.0 * std::sqrt(in.n)) * std::sqrt(complexity);
}

Interval alpha_admissible_range(double omega) {
  if (!(omega > 0.0 && omega < 1.0)) throw DomainError("alpha range needs omega in (0, 1)");
  Interval r;
  // Compare against the rounded sqrt(2)/2 so the boundary itself stays unbounded.
  if (omega <= std::numbers::sqrt2 / 2.0) return r;
  const double denom = 2.0 * omega * omega - 1.0;
  if (denom > 0.0) r.upper = 2.0 * omega * std::sqrt(1.0 - omega * omega) / denom;
  return r;
}

ConvergenceBound convergence_bound(const ConvergenceInputs& in) {
  if (!(in.beta > 0.0)) throw DomainError("convergence bound needs beta > 0");
  if (!(in.steps >= 1.0)) throw DomainError("convergence bound needs T >= 1");
  if (!(in.gap >= 0.0 && in.sigma2 >= 0.0 && in.rho >= 0.0 && in.alpha >= 0.0)) {
    throw DomainError("convergence bound needs nonnegative gap, sigma2, rho, alpha");
  }
  ConvergenceBound out;
  out.eta = 1.0 / (2.0 * in.beta);
  if (in.sigma2 > 0.0) {
    out.eta = std::min(out.eta, std::sqrt(in.gap) / std::sqrt(in.beta * in.sigma2 * in.steps));
  }
  if (!(out.eta > 0.0)) throw DomainError("convergence bound needs gap > 0 when sigma2 > 0");
  out.bound = 2.0 * in.gap / (out.eta * in.steps) +
              in.beta * in.beta * (in.rho * in.rho + in.alpha * in.alpha) +
              2.0 * in.beta * in.sigma2 * out.eta;
  return out;
}

}  // namespace samlab
