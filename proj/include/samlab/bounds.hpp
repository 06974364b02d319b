#pragma once

#include <cstddef>
#include <limits>

namespace samlab {

// 1 + 2 ln(pi^2 / 6), the constant of the PAC-Bayes bound.
double pac_bayes_constant();

struct BoundInputs {
  double empirical_loss = 0.0;  // f_S
  double lambda1 = 0.0;
  double param_norm = 0.0;      // |x|
  double d = 1.0;
  double n = 1.0;
  double sigma = 1.0;           // posterior standard deviation
  double loss_bound = 1.0;      // L
  double third_bound = 0.0;     // C
  double delta = 0.05;
};

// f_S + d sigma^2 lambda1 / 2 + C d^3 sigma^3 / 6
//   + L / (2 sqrt n) sqrt(d ln(1 + |x|^2/(d sigma^2)) + K + 2 ln(1/delta) + 4 ln(n + d)).
// Throws DomainError unless n >= 1, d >= 1, sigma > 0, L > 0, C >= 0,
// delta in (0, 1) and |x| >= 0.
double pac_bayes_bound(const BoundInputs& in);

struct Interval {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  bool upper_infinite() const { return upper == std::numeric_limits<double>::infinity(); }
  bool contains_open(double v) const { return v > lower && v < upper; }
};

// (0, 2 w sqrt(1 - w^2) / (2 w^2 - 1)) for w > sqrt(2)/2, else (0, inf).
// Throws DomainError unless w in (0, 1).
Interval alpha_admissible_range(double omega);

struct ConvergenceInputs {
  double beta = 1.0;   // smoothness
  double gap = 0.0;    // f(x0) - f*
  double sigma2 = 0.0; // batch gradient variance
  double steps = 1.0;  // T
  double rho = 0.0;
  double alpha = 0.0;
};

struct ConvergenceBound {
  double eta = 0.0;
  double bound = 0.0;
};

// eta = min{1/(2 beta), sqrt(gap) / sqrt(beta sigma2 T)} (second arm only when
// sigma2 > 0); bound = 2 gap/(eta T) + beta^2 (rho^2 + alpha^2) + 2 beta sigma2 eta.
// Throws DomainError unless beta > 0, T >= 1 and the rest are >= 0.
ConvergenceBound convergence_bound(const ConvergenceInputs& in);

}  // namespace samlab
