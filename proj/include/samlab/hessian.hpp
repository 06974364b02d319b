#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "samlab/dense_matrix.hpp"
#include "samlab/loss_oracle.hpp"
#include "samlab/param_vector.hpp"

namespace samlab {

// Symmetric operator accessed only through products.
struct LinearOperator {
  std::shared_ptr<const ParamLayout> layout;
  std::function<ParamVector(const ParamVector&)> apply;

  std::size_t dim() const { return layout->size(); }
};

// v -> H(x) v, with H the oracle's Hessian at x.
LinearOperator hessian_operator(const LossOracle& oracle, const ParamVector& x);
// Explicit symmetric matrix, used by tests and probes.
LinearOperator matrix_operator(const DenseMatrix& m);

struct EigenEstimate {
  double value = 0.0;   // Rayleigh quotient of the unshifted operator
  ParamVector vector;   // unit norm
  double residual = 0.0;
  std::size_t iterations = 0;
  std::size_t hvp_calls = 0;
  double shift = 0.0;
};

// q rounds of v <- Av/|Av| from a unit start, then one product for the
// Rayleigh quotient and one for the residual |Hv - lambda v|: q + 2 products.
// A shifted operator converges to the top algebraic eigenvalue when the
// shift exceeds |lambda_min|; `shift` is subtracted back from the estimate.
// Throws ZeroIterate when |Av| < 1e-300.
EigenEstimate power_iteration(const LinearOperator& op, std::size_t q, const ParamVector& start,
                              double shift = 0.0);
// Start drawn as a normalized Gaussian from Rng(seed, Stream::Power, 0).
EigenEstimate power_iteration(const LinearOperator& op, std::size_t q, std::uint64_t seed,
                              double shift = 0.0);
// Power iteration restricted to the orthogonal complement of `basis`
// (orthonormal), projecting every iterate.
EigenEstimate power_iteration_deflated(const LinearOperator& op, std::size_t q,
                                       const ParamVector& start,
                                       const std::vector<ParamVector>& basis);
ParamVector random_unit(const std::shared_ptr<const ParamLayout>& layout, std::uint64_t seed,
                        std::uint64_t stage);

struct AlignmentReport {
  double value = 0.0;   // 1 - min_s |e/|e| - s v|, in [1 - sqrt 2, 1]
  double direction = 1.0;
  double cosine = 0.0;  // |<e/|e|, v>|
};

// Throws DegenerateVector when |eps| < tau.
AlignmentReport align(const ParamVector& eps, const ParamVector& v, double tau = 1e-12);

struct SpectrumReport {
  std::vector<double> eigenvalues;  // descending |lambda|
  std::vector<double> residuals;
  std::vector<bool> converged;      // residual <= tol * max(1, |lambda|)
  std::vector<ParamVector> eigenvectors;
  double trace = 0.0;
  double trace_stderr = 0.0;
  std::size_t trace_probes = 0;
  std::size_t hvp_calls = 0;

  bool all_converged() const;
};

// Power iteration with Gram-Schmidt deflation against earlier eigenvectors at
// every iterate. Stage j starts from Rng(seed, Stream::Power, j), so k = 1
// reproduces power_iteration(op, q, seed). Non-converged stages are reported
// through `converged`, never silently accepted. trace_probes > 1 adds a
// Hutchinson trace estimate.
SpectrumReport spectrum_deflated(const LinearOperator& op, std::size_t k, std::size_t q,
                                 std::uint64_t seed, double tol = 1e-6,
                                 std::size_t trace_probes = 0);

struct TraceEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
};

// Mean of z^T A z over m Rademacher probes z_i from Rng(seed, Stream::Trace, i),
// with the standard error of the mean. Requires m >= 2.
TraceEstimate hutchinson_trace(const LinearOperator& op, std::size_t m, std::uint64_t seed);
// Same estimator over caller-supplied probes.
TraceEstimate hutchinson_trace(const LinearOperator& op, const std::vector<ParamVector>& probes);

// rho^2 lambda_1 / 2.
double sharpness_proxy(double lambda1, double rho);

}  // namespace samlab
