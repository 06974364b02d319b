#include "samlab/sde.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "samlab/errors.hpp"
#include "samlab/hessian.hpp"
#include "samlab/rng.hpp"

namespace samlab {

OracleFamily partition_family(std::shared_ptr<const Model> model, const Dataset& data,
                              std::size_t batch_size, DerivativeMode mode) {
  OracleFamily family;
  for (Batch& b : enumerate_batches(data, batch_size)) {
    family.emplace_back(model, std::make_shared<const Batch>(std::move(b)), mode);
  }
  return family;
}

namespace {

void require_family(const OracleFamily& family) {
  if (family.empty()) throw EmptyDataset("expectation over an empty oracle family");
}

ParamVector mean_of(const std::vector<ParamVector>& vs) {
  ParamVector out = vs.front().zeros_like();
  for (const auto& v : vs) out += v;
  out *= 1.0 / static_cast<double>(vs.size());
  return out;
}

Eigen::MatrixXd to_eigen(const DenseMatrix& m) {
  Eigen::MatrixXd e(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) e(i, j) = m(i, j);
  return e;
}

DenseMatrix from_eigen(const Eigen::MatrixXd& e) {
  DenseMatrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = e(i, j);
  return m;
}

Eigen::Map<const Eigen::VectorXd> view(const ParamVector& v) {
  return {v.values().data(), static_cast<Eigen::Index>(v.size())};
}

std::vector<BatchStatistics> all_statistics(const OracleFamily& family, const ParamVector& x,
                                            bool with_third, double tau) {
  require_family(family);
  std::vector<BatchStatistics> stats;
  stats.reserve(family.size());
  for (const auto& o : family) stats.push_back(batch_statistics(o, x, with_third, tau));
  return stats;
}

}  // namespace

BatchStatistics batch_statistics(const LossOracle& oracle, const ParamVector& x, bool with_third,
                                 double tau) {
  BatchStatistics s;
  s.t1 = oracle.grad(x);
  s.t2 = x.zeros_like();
  s.t3 = x.zeros_like();
  const double n = s.t1.norm();
  if (!(n >= tau)) {
    s.degenerate = true;
    return s;
  }
  s.t2 = oracle.hvp(x, s.t1);
  s.t2 *= 1.0 / n;
  if (with_third) s.t3 = oracle.third_directional(x, (1.0 / n) * s.t1);
  return s;
}

ParamVector DriftDecomposition::combined() const {
  ParamVector out = term1;
  out.axpy(rho, term2);
  out.axpy(0.5 * rho * rho, term3);
  return out;
}

DriftDecomposition drift(const OracleFamily& family, const ParamVector& x, SdeOrder order,
                         double rho, double tau) {
  const auto stats = all_statistics(family, x, order == SdeOrder::Third, tau);
  std::vector<ParamVector> t1, t2, t3;
  for (const auto& s : stats) {
    t1.push_back(s.t1);
    t2.push_back(s.t2);
    t3.push_back(s.t3);
  }
  return DriftDecomposition{mean_of(t1), mean_of(t2), mean_of(t3), rho};
}

DriftDecomposition drift_aligned(const OracleFamily& family, const ParamVector& x,
                                 AlignedVariant variant, double rho, std::size_t q,
                                 std::uint64_t seed, bool gap_check, double tau) {
  require_family(family);
  std::vector<ParamVector> t1, t2, t3;
  for (std::size_t b = 0; b < family.size(); ++b) {
    const LossOracle& o = family[b];
    ParamVector g = o.grad(x);
    const double n = g.norm();
    t1.push_back(g);
    if (!(n >= tau)) {
      t2.push_back(x.zeros_like());
      t3.push_back(x.zeros_like());
      continue;
    }
    const LinearOperator op = hessian_operator(o, x);
    const EigenEstimate top = power_iteration(op, q, random_unit(x.layout(), seed, b));
    if (gap_check && x.size() > 1) {
      // A vanishing deflated iterate means zero curvature off v1.
      double a2 = 0.0;
      try {
        a2 = std::abs(power_iteration_deflated(
                          op, q, random_unit(x.layout(), seed, family.size() + b), {top.vector})
                          .value);
      } catch (const ZeroIterate&) {
      }
      const double a1 = std::abs(top.value);
      if (a1 - a2 <= 1e-8 * a1) {
        std::ostringstream os;
        os << "batch " << b << ": |lambda1| = " << a1 << ", |lambda2| = " << a2;
        throw GapViolated(os.str());
      }
    }
    if (variant == AlignedVariant::RhoSquared) {
      const double s = g.dot(top.vector) >= 0.0 ? 1.0 : -1.0;
      t2.push_back((s * top.value) * top.vector);
    } else {
      ParamVector h = o.hvp(x, g);
      h *= 1.0 / n;
      t2.push_back(std::move(h));
    }
    t3.push_back(o.third_directional(x, top.vector));
  }
  return DriftDecomposition{mean_of(t1), mean_of(t2), mean_of(t3), rho};
}

DiffusionModel sigma_exact(const OracleFamily& family, const ParamVector& x, double rho,
                           SdeOrder order, double tau) {
  const std::size_t d = x.size();
  if (d > kExactDiffusionLimit) {
    throw DimensionTooLarge("exact diffusion needs d <= " + std::to_string(kExactDiffusionLimit) +
                            ", got " + std::to_string(d));
  }
  const bool third = order == SdeOrder::Third;
  const auto stats = all_statistics(family, x, third, tau);
  const double m = static_cast<double>(stats.size());

  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(d), m2 = m1, m3 = m1;
  for (const auto& s : stats) {
    m1 += view(s.t1);
    m2 += view(s.t2);
    m3 += view(s.t3);
  }
  m1 /= m;
  m2 /= m;
  m3 /= m;

  Eigen::MatrixXd s11 = Eigen::MatrixXd::Zero(d, d), s12 = s11, s22 = s11, s13 = s11;
  for (const auto& s : stats) {
    const Eigen::VectorXd a = view(s.t1) - m1;
    const Eigen::VectorXd b = view(s.t2) - m2;
    const Eigen::VectorXd c = view(s.t3) - m3;
    s11 += a * a.transpose();
    s12 += a * b.transpose();
    if (third) {
      s22 += b * b.transpose();
      s13 += a * c.transpose();
    }
  }
  Eigen::MatrixXd sigma = s11 + rho * (s12 + s12.transpose());
  if (third) sigma += rho * rho * (s22 + 0.5 * (s13 + s13.transpose()));
  sigma /= m;
  sigma = 0.5 * (sigma + sigma.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  Eigen::VectorXd lam = eig.eigenvalues();
  double clipped = 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < 0.0) {
      clipped += -lam(i);
      lam(i) = 0.0;
    }
  }
  const Eigen::MatrixXd& q = eig.eigenvectors();
  DiffusionModel out;
  out.sigma = from_eigen(sigma);
  out.sigma_psd = from_eigen(q * lam.asDiagonal() * q.transpose());
  out.sqrt = from_eigen(q * lam.cwiseSqrt().asDiagonal() * q.transpose());
  out.clipped_mass = clipped;
  out.rho = rho;
  return out;
}

SampledNoise::SampledNoise(const OracleFamily& family, const ParamVector& x, double rho,
                           SdeOrder order, double tau) {
  const auto stats = all_statistics(family, x, order == SdeOrder::Third, tau);
  std::vector<ParamVector> u;
  for (const auto& s : stats) {
    ParamVector v = s.t1;
    v.axpy(rho, s.t2);
    v.axpy(0.5 * rho * rho, s.t3);
    u.push_back(std::move(v));
  }
  const ParamVector mean = mean_of(u);
  for (auto& v : u) centered_.push_back(v - mean);
}

ParamVector SampledNoise::draw(std::uint64_t seed, std::uint64_t step) const {
  Rng rng(seed, Stream::Noise, step);
  return centered_[rng.below(centered_.size())];
}

ParamVector noise_sampled(const OracleFamily& family, const ParamVector& x, double rho,
                          std::uint64_t seed, std::uint64_t step) {
  return SampledNoise(family, x, rho).draw(seed, step);
}

SdeProcess parse_sde_process(const std::string& name) {
  if (name == "sde2") return SdeProcess::Second;
  if (name == "sde3") return SdeProcess::Third;
  if (name == "sde-aligned-rho") return SdeProcess::AlignedRho;
  if (name == "sde-aligned-rho2") return SdeProcess::AlignedRhoSquared;
  throw ConfigError("unknown SDE process '" + name +
                    "' (expected sde2|sde3|sde-aligned-rho|sde-aligned-rho2)");
}

std::string to_string(SdeProcess p) {
  switch (p) {
    case SdeProcess::Second: return "sde2";
    case SdeProcess::Third: return "sde3";
    case SdeProcess::AlignedRho: return "sde-aligned-rho";
    case SdeProcess::AlignedRhoSquared: return "sde-aligned-rho2";
  }
  return "?";
}

DiffusionMode parse_diffusion(const std::string& name) {
  if (name == "exact") return DiffusionMode::Exact;
  if (name == "sampled") return DiffusionMode::Sampled;
  if (name == "off") return DiffusionMode::Off;
  throw ConfigError("unknown diffusion mode '" + name + "' (expected exact|sampled|off)");
}

std::string to_string(DiffusionMode m) {
  switch (m) {
    case DiffusionMode::Exact: return "exact";
    case DiffusionMode::Sampled: return "sampled";
    case DiffusionMode::Off: return "off";
  }
  return "?";
}

void SdeConfig::validate() const {
  if (!(eta > 0.0)) throw ConfigError("SDE learning rate eta must be > 0");
  if (!(rho >= 0.0)) throw ConfigError("SDE rho must be >= 0");
  if (dt < 0.0) throw ConfigError("integrator step dt must be > 0");
  if (step_size() > eta * (1.0 + 1e-12)) throw ConfigError("integrator step dt must be <= eta");
  if (aligned_q < 1) throw ConfigError("aligned power iteration count must be >= 1");
}

std::vector<std::string> SdeConfig::warnings() const {
  std::vector<std::string> out;
  if (rho > std::cbrt(eta)) {
    std::ostringstream os;
    os << "rho=" << rho << " exceeds eta^(1/3)=" << std::cbrt(eta)
       << "; the weak-approximation regime assumes rho = O(eta^(1/3))";
    out.push_back(os.str());
  }
  return out;
}

ParamVector euler_maruyama_step(const ParamVector& X, const SdeConfig& cfg,
                                const ParamVector& drift, const ParamVector& xi) {
  const double dt = cfg.step_size();
  ParamVector next = X;
  next.axpy(-dt, drift);
  next.axpy(std::sqrt(cfg.eta) * std::sqrt(dt), xi);
  if (!next.all_finite()) throw NonFiniteState("Euler-Maruyama iterate is not finite");
  return next;
}

ParamVector sde_step(const OracleFamily& family, const ParamVector& X, const SdeConfig& cfg,
                     std::uint64_t step, SdeStepInfo* info) {
  const SdeOrder order = cfg.process == SdeProcess::Second ? SdeOrder::Second : SdeOrder::Third;
  DriftDecomposition dd;
  switch (cfg.process) {
    case SdeProcess::Second:
    case SdeProcess::Third:
      dd = drift(family, X, order, cfg.rho, cfg.tau);
      break;
    case SdeProcess::AlignedRho:
    case SdeProcess::AlignedRhoSquared:
      dd = drift_aligned(family, X,
                         cfg.process == SdeProcess::AlignedRho ? AlignedVariant::Rho
                                                               : AlignedVariant::RhoSquared,
                         cfg.rho, cfg.aligned_q, cfg.seed, true, cfg.tau);
      break;
  }
  ParamVector xi = X.zeros_like();
  if (cfg.diffusion == DiffusionMode::Exact) {
    const DiffusionModel dm = sigma_exact(family, X, cfg.rho, order, cfg.tau);
    Rng rng(cfg.seed, Stream::Brownian, step);
    std::vector<double> z(X.size());
    for (double& v : z) v = rng.normal();
    xi = ParamVector(X.layout(), dm.sqrt.multiply(z));
    if (info) info->clipped_mass = dm.clipped_mass;
  } else if (cfg.diffusion == DiffusionMode::Sampled) {
    xi = SampledNoise(family, X, cfg.rho, order, cfg.tau).draw(cfg.seed, step);
  }
  return euler_maruyama_step(X, cfg, dd.combined(), xi);
}

std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y,
                                   double floor) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(y[i] > floor) || !(x[i] > 0.0)) return std::nullopt;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

MomentProbeReport one_step_moment_probe(const OracleFamily& family, const ParamVector& x,
                                        double eta, const std::vector<double>& rho_grid,
                                        double tau) {
  require_family(family);
  const std::size_t d = x.size();
  if (d > kMomentProbeLimit) {
    throw DimensionTooLarge("moment probe needs d <= " + std::to_string(kMomentProbeLimit) +
                            ", got " + std::to_string(d));
  }
  if (!(eta > 0.0)) throw ConfigError("moment probe needs eta > 0");
  const double m = static_cast<double>(family.size());

  // Gradient-sized quantities below this are treated as exact zeros.
  const DriftDecomposition base = drift(family, x, SdeOrder::Third, 0.0, tau);
  const double scale = eta * (1.0 + base.term1.norm() + base.term2.norm() + base.term3.norm());
  const double floor1 = 1e-12 * scale;
  const double floor2 = 1e-12 * scale * scale;

  MomentProbeReport rep;
  for (double rho : rho_grid) {
    if (!(rho > 0.0)) throw ConfigError("moment probe rho grid must be positive");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, d);
    for (const auto& o : family) {
      const ParamVector g = o.grad(x);
      const double n = g.norm();
      ParamVector probe = x;
      if (n >= tau) probe.axpy(rho / n, g);
      const Eigen::VectorXd delta = -eta * view(o.grad(probe));
      mean += delta;
      second += delta * delta.transpose();
    }
    mean /= m;
    second /= m;

    rep.rho.push_back(rho);
    for (SdeOrder order : {SdeOrder::Third, SdeOrder::Second}) {
      DriftDecomposition dd = base;
      dd.rho = rho;
      if (order == SdeOrder::Second) dd.term3 = x.zeros_like();
      const ParamVector c = dd.combined();
      const Eigen::VectorXd dv = view(c);
      const double e1 = (mean + eta * dv).norm();
      const Eigen::MatrixXd sigma = to_eigen(sigma_exact(family, x, rho, order, tau).sigma);
      const double e2 = (second - eta * eta * (dv * dv.transpose() + sigma)).norm();
      if (order == SdeOrder::Third) {
        rep.e1_third.push_back(e1);
        rep.e2_third.push_back(e2);
      } else {
        rep.e1_second.push_back(e1);
        rep.e2_second.push_back(e2);
      }
    }
  }
  rep.slope_e1_third = loglog_slope(rep.rho, rep.e1_third, floor1);
  rep.slope_e1_second = loglog_slope(rep.rho, rep.e1_second, floor1);
  rep.slope_e2_third = loglog_slope(rep.rho, rep.e2_third, floor2);
  rep.slope_e2_second = loglog_slope(rep.rho, rep.e2_second, floor2);
  return rep;
}

}  // namespace samlab
