#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "samlab/dataset.hpp"
#include "samlab/dense_matrix.hpp"
#include "samlab/loss_oracle.hpp"
#include "samlab/param_vector.hpp"

namespace samlab {

// One oracle per block of the index-order partition; expectations over the
// batch index are plain means over the family, taken in index order.
OracleFamily partition_family(std::shared_ptr<const Model> model, const Dataset& data,
                              std::size_t batch_size,
                              DerivativeMode mode = DerivativeMode::Exact);

enum class SdeOrder { Second, Third };
enum class AlignedVariant { Rho, RhoSquared };

// Per-batch vectors t1 = g, t2 = H g / |g|, t3 = grad^3 f (g, g) / |g|^2.
// A degenerate batch (|g| < tau) has t2 = t3 = 0.
struct BatchStatistics {
  ParamVector t1, t2, t3;
  bool degenerate = false;
};

BatchStatistics batch_statistics(const LossOracle& oracle, const ParamVector& x,
                                 bool with_third, double tau = 1e-12);

struct DriftDecomposition {
  ParamVector term1, term2, term3;
  double rho = 0.0;

  // term1 + rho * term2 + rho^2 / 2 * term3
  ParamVector combined() const;
};

// Expectations of the batch statistics. The second-order drift has term3 = 0.
DriftDecomposition drift(const OracleFamily& family, const ParamVector& x, SdeOrder order,
                         double rho, double tau = 1e-12);

// Aligned drifts built from per-batch top eigenpairs (v1, lambda1),
// found by q power iterations started from random_unit(layout, seed, batch).
// term3 becomes E[grad^3 f (v1, v1)]; the RhoSquared variant also replaces
// term2 by E[s* lambda1 v1] with s* = sign <g, v1>. With gap_check, each batch
// is deflated once more and GapViolated is thrown when
// |lambda1| - |lambda2| <= 1e-8 |lambda1|.
DriftDecomposition drift_aligned(const OracleFamily& family, const ParamVector& x,
                                 AlignedVariant variant, double rho, std::size_t q = 50,
                                 std::uint64_t seed = 0, bool gap_check = true,
                                 double tau = 1e-12);

// Sigma = S11 + rho (S12 + S12^T) + rho^2 (S22 + (S13 + S13^T) / 2) from the
// centered batch vectors, with Sab = E[a b^T]. Order Second keeps only the
// S11 and rho terms.
struct DiffusionModel {
  DenseMatrix sigma;      // symmetrized
  DenseMatrix sigma_psd;  // negative eigenvalues clipped to 0
  DenseMatrix sqrt;       // principal square root of sigma_psd
  double clipped_mass = 0.0;  // sum of |negative eigenvalues|
  double rho = 0.0;
};

inline constexpr std::size_t kExactDiffusionLimit = 512;

// Throws DimensionTooLarge when d > kExactDiffusionLimit.
DiffusionModel sigma_exact(const OracleFamily& family, const ParamVector& x, double rho,
                           SdeOrder order = SdeOrder::Third, double tau = 1e-12);

// Draws u_gamma - mean(u) for a uniform batch gamma, with
// u = t1 + rho t2 + rho^2/2 t3. Its covariance equals sigma_exact up to O(rho^3).
class SampledNoise {
 public:
  SampledNoise(const OracleFamily& family, const ParamVector& x, double rho,
               SdeOrder order = SdeOrder::Third, double tau = 1e-12);

  // Batch index from Rng(seed, Stream::Noise, step).
  ParamVector draw(std::uint64_t seed, std::uint64_t step) const;
  std::size_t batches() const { return centered_.size(); }

 private:
  std::vector<ParamVector> centered_;
};

ParamVector noise_sampled(const OracleFamily& family, const ParamVector& x, double rho,
                          std::uint64_t seed, std::uint64_t step = 0);

enum class SdeProcess { Second, Third, AlignedRho, AlignedRhoSquared };
enum class DiffusionMode { Exact, Sampled, Off };

SdeProcess parse_sde_process(const std::string& name);
std::string to_string(SdeProcess p);  // sde2 | sde3 | sde-aligned-rho | sde-aligned-rho2
DiffusionMode parse_diffusion(const std::string& name);
std::string to_string(DiffusionMode m);

struct SdeConfig {
  SdeProcess process = SdeProcess::Third;
  double eta = 0.01;
  double rho = 0.2;
  double dt = 0.0;  // 0 means dt = eta
  std::size_t steps = 0;
  DiffusionMode diffusion = DiffusionMode::Exact;
  std::size_t aligned_q = 50;
  std::uint64_t seed = 0;
  double tau = 1e-12;

  double step_size() const { return dt > 0.0 ? dt : eta; }
  // Throws ConfigError unless eta > 0, rho >= 0 and 0 < dt <= eta.
  void validate() const;
  // Non-fatal notes, e.g. rho larger than eta^(1/3).
  std::vector<std::string> warnings() const;
};

// X - drift dt + sqrt(eta) sqrt(dt) xi. Throws NonFiniteState.
ParamVector euler_maruyama_step(const ParamVector& X, const SdeConfig& cfg,
                                const ParamVector& drift, const ParamVector& xi);

struct SdeStepInfo {
  double clipped_mass = 0.0;
};

// One integrator step of the configured process at X. Gaussian increments
// come from Rng(seed, Stream::Brownian, step), so processes sharing a seed
// share their Brownian path.
ParamVector sde_step(const OracleFamily& family, const ParamVector& X, const SdeConfig& cfg,
                     std::uint64_t step, SdeStepInfo* info = nullptr);

struct MomentProbeReport {
  std::vector<double> rho;
  std::vector<double> e1_third, e1_second;  // |E[delta] + eta drift|
  std::vector<double> e2_third, e2_second;  // |E[delta delta^T] - eta^2 (d d^T + Sigma)|_F
  // Least-squares slopes of log e against log rho; empty when any error in
  // the series sits at round-off.
  std::optional<double> slope_e1_third, slope_e1_second;
  std::optional<double> slope_e2_third, slope_e2_second;
};

inline constexpr std::size_t kMomentProbeLimit = 64;

// Exact one-step moments of discrete SAM, x' = x - eta grad f_gamma(x + rho g/|g|),
// over the whole family. Throws DimensionTooLarge when d > kMomentProbeLimit.
MomentProbeReport one_step_moment_probe(const OracleFamily& family, const ParamVector& x,
                                        double eta, const std::vector<double>& rho_grid,
                                        double tau = 1e-12);

// Slope of the least-squares line through (log x, log y); empty when some
// y <= floor.
std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y,
                                   double floor);

}  // namespace samlab
