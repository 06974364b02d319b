#include "samlab/hessian.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "samlab/errors.hpp"
#include "samlab/rng.hpp"

namespace samlab {

LinearOperator hessian_operator(const LossOracle& oracle, const ParamVector& x) {
  LinearOperator op;
  op.layout = x.layout();
  op.apply = [oracle, x](const ParamVector& v) { return oracle.hvp(x, v); };
  return op;
}

LinearOperator matrix_operator(const DenseMatrix& m) {
  if (m.rows != m.cols) throw std::invalid_argument("matrix operator must be square");
  LinearOperator op;
  op.layout = ParamLayout::flat(m.rows);
  op.apply = [m, layout = op.layout](const ParamVector& v) {
    return ParamVector(layout, m.multiply(v.values()));
  };
  return op;
}

ParamVector random_unit(const std::shared_ptr<const ParamLayout>& layout, std::uint64_t seed,
                        std::uint64_t stage) {
  ParamVector v(layout);
  Rng rng(seed, Stream::Power, stage);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng.normal();
  v *= 1.0 / v.norm();
  return v;
}

namespace {

void project_out(ParamVector& v, const std::vector<ParamVector>& basis) {
  for (const auto& b : basis) v.axpy(-b.dot(v), b);
}

ParamVector normalized(ParamVector v, const char* what) {
  const double n = v.norm();
  if (!(n >= 1e-300)) throw ZeroIterate(std::string(what) + " has norm " + std::to_string(n));
  v *= 1.0 / n;
  return v;
}

// Shared by power_iteration and each deflation stage so that k = 1 matches.
EigenEstimate iterate(const LinearOperator& op, std::size_t q, ParamVector v, double shift,
                      const std::vector<ParamVector>& basis) {
  if (q < 1) throw ConfigError("power iteration needs q >= 1");
  if (v.size() != op.dim()) throw std::invalid_argument("start vector has wrong dimension");
  auto apply = [&](const ParamVector& u) {
    ParamVector au = op.apply(u);
    if (shift != 0.0) au.axpy(shift, u);
    return au;
  };
  project_out(v, basis);
  v = normalized(std::move(v), "start vector");
  for (std::size_t i = 0; i < q; ++i) {
    ParamVector w = apply(v);
    project_out(w, basis);
    v = normalized(std::move(w), "power iterate");
  }
  EigenEstimate est;
  est.value = v.dot(apply(v)) - shift;
  ParamVector r = apply(v);
  r.axpy(-(est.value + shift), v);
  est.residual = r.norm();
  est.vector = std::move(v);
  est.iterations = q;
  est.hvp_calls = q + 2;
  est.shift = shift;
  return est;
}

}  // namespace

EigenEstimate power_iteration(const LinearOperator& op, std::size_t q, const ParamVector& start,
                              double shift) {
  return iterate(op, q, start, shift, {});
}

EigenEstimate power_iteration(const LinearOperator& op, std::size_t q, std::uint64_t seed,
                              double shift) {
  return iterate(op, q, random_unit(op.layout, seed, 0), shift, {});
}

EigenEstimate power_iteration_deflated(const LinearOperator& op, std::size_t q,
                                       const ParamVector& start,
                                       const std::vector<ParamVector>& basis) {
  return iterate(op, q, start, 0.0, basis);
}

AlignmentReport align(const ParamVector& eps, const ParamVector& v, double tau) {
  if (eps.size() != v.size()) throw std::invalid_argument("align: dimension mismatch");
  const double ne = eps.norm();
  if (!(ne >= tau)) throw DegenerateVector("perturbation norm below the gradient floor");
  if (std::abs(v.norm() - 1.0) > 1e-8) throw std::invalid_argument("align: v must be unit norm");
  const ParamVector e = (1.0 / ne) * eps;
  const double c = e.dot(v);
  AlignmentReport rep;
  rep.direction = c >= 0.0 ? 1.0 : -1.0;
  rep.cosine = std::min(1.0, std::abs(c));
  rep.value = 1.0 - (e - rep.direction * v).norm();
  return rep;
}

bool SpectrumReport::all_converged() const {
  return std::all_of(converged.begin(), converged.end(), [](bool b) { return b; });
}

SpectrumReport spectrum_deflated(const LinearOperator& op, std::size_t k, std::size_t q,
                                 std::uint64_t seed, double tol, std::size_t trace_probes) {
  if (k < 1 || k > 64) throw ConfigError("spectrum needs 1 <= k <= 64");
  if (k > op.dim()) throw ConfigError("spectrum k exceeds the operator dimension");
  std::vector<EigenEstimate> found;
  std::vector<ParamVector> basis;
  SpectrumReport rep;
  for (std::size_t j = 0; j < k; ++j) {
    EigenEstimate est = iterate(op, q, random_unit(op.layout, seed, j), 0.0, basis);
    rep.hvp_calls += est.hvp_calls;
    basis.push_back(est.vector);
    found.push_back(std::move(est));
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(found[a].value) > std::abs(found[b].value);
  });
  for (std::size_t i : order) {
    rep.eigenvalues.push_back(found[i].value);
    rep.residuals.push_back(found[i].residual);
    rep.converged.push_back(found[i].residual <= tol * std::max(1.0, std::abs(found[i].value)));
    rep.eigenvectors.push_back(found[i].vector);
  }
  if (trace_probes > 0) {
    const TraceEstimate tr = hutchinson_trace(op, trace_probes, seed);
    rep.trace = tr.estimate;
    rep.trace_stderr = tr.standard_error;
    rep.trace_probes = trace_probes;
    rep.hvp_calls += trace_probes;
  }
  return rep;
}

TraceEstimate hutchinson_trace(const LinearOperator& op, const std::vector<ParamVector>& probes) {
  const std::size_t m = probes.size();
  if (m < 2) throw ConfigError("Hutchinson trace needs at least 2 probes");
  std::vector<double> samples;
  samples.reserve(m);
  for (const auto& z : probes) samples.push_back(z.dot(op.apply(z)));
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / m;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  TraceEstimate out;
  out.estimate = mean;
  out.standard_error = std::sqrt(ss / static_cast<double>(m - 1) / static_cast<double>(m));
  return out;
}

TraceEstimate hutchinson_trace(const LinearOperator& op, std::size_t m, std::uint64_t seed) {
  if (m < 2) throw ConfigError("Hutchinson trace needs at least 2 probes");
  // Probes are generated and consumed one at a time to keep memory at O(d).
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    ParamVector z(op.layout);
    Rng rng(seed, Stream::Trace, i);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] = rng.rademacher();
    const double s = z.dot(op.apply(z));
    const double delta = s - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (s - mean);
  }
  TraceEstimate out;
  out.estimate = mean;
  out.standard_error = std::sqrt(m2 / static_cast<double>(m - 1) / static_cast<double>(m));
  return out;
}

double sharpness_proxy(double lambda1, double rho) {
  if (rho < 0.0) throw DomainError("sharpness proxy needs rho >= 0");
  return 0.5 * rho * rho * lambda1;
}

}  // namespace samlab
