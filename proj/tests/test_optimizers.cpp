#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "samlab/bounds.hpp"
#include "samlab/errors.hpp"
#include "samlab/optimizers.hpp"
#include "test_support.hpp"

namespace samlab {
namespace {

using testing::mlp_282_oracle;
using testing::quadratic_oracle;

LossOracle half_square() { return quadratic_oracle(DenseMatrix::identity(1)); }

OptimizerConfig plain(Method m, double lr, double rho) {
  OptimizerConfig cfg;
  cfg.method = m;
  cfg.lr = lr;
  cfg.rho = rho;
  return cfg;
}

double max_diff(const ParamVector& a, const ParamVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<ParamVector> trajectory(const LossOracle& o, const OptimizerConfig& cfg,
                                    ParamVector x, std::size_t steps,
                                    std::size_t* hvps = nullptr) {
  std::vector<ParamVector> out{x};
  OptimizerState st;
  for (std::size_t k = 0; k < steps; ++k) {
    auto r = step(x, o, cfg, st);
    x = r.x;
    st = r.state;
    out.push_back(x);
  }
  if (hvps) *hvps = st.hvp_count;
  return out;
}

TEST(PerturbationTest, SamNormalizes) {
  const auto p = sam_perturbation(ParamVector::from({3, 4}));
  EXPECT_DOUBLE_EQ(p[0], 0.6);
  EXPECT_DOUBLE_EQ(p[1], 0.8);
  EXPECT_EQ(sam_perturbation(ParamVector::from({1, 0})).values(), (std::vector<double>{1, 0}));
}

TEST(PerturbationTest, SamBelowFloorIsZero) {
  const auto p = sam_perturbation(ParamVector::from({1e-13, 0}));
  EXPECT_EQ(p.values(), (std::vector<double>{0, 0}));
}

TEST(PerturbationTest, EigenSamHandExample) {
  const double r = 1.0 / std::sqrt(2.0);
  const auto p = eigen_sam_perturbation(ParamVector::from({1, 0}), ParamVector::from({r, r}), 0.2);
  EXPECT_NEAR(p[0], 1.0, 1e-15);
  EXPECT_NEAR(p[1], 0.1414214, 1e-7);
}

TEST(PerturbationTest, EigenSamAlphaZeroIsSam) {
  const auto g = ParamVector::from({0.3, -1.2, 2.0});
  const auto v = (1.0 / std::sqrt(3.0)) * ParamVector::from({1, 1, 1});
  EXPECT_EQ(eigen_sam_perturbation(g, v, 0.0).values(), sam_perturbation(g).values());
}

TEST(PerturbationTest, EigenSamParallelEigenvectorIsSam) {
  const auto g = ParamVector::from({3, 4});
  for (double s : {1.0, -1.0}) {
    const auto v = ParamVector::from({s * 0.6, s * 0.8});
    EXPECT_LT(max_diff(eigen_sam_perturbation(g, v, 0.7), sam_perturbation(g)), 1e-15);
  }
}

TEST(PerturbationTest, EigenSamSignFollowsInnerProduct) {
  const auto g = ParamVector::from({1, 0});
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_LT(eigen_sam_perturbation(g, ParamVector::from({-r, r}), 0.2)[1], 0.0);
  // Tie: the perpendicular eigenvector contributes with sign +1.
  EXPECT_DOUBLE_EQ(eigen_sam_perturbation(g, ParamVector::from({0, 1}), 0.5)[1], 0.5);
}

TEST(PerturbationTest, EigenSamSquaredNorm) {
  Rng rng(3, Stream::Probe);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> gv(6), vv(6);
    for (auto& e : gv) e = rng.normal();
    for (auto& e : vv) e = rng.normal();
    const auto g = ParamVector::from(gv);
    auto v = ParamVector::from(vv);
    v *= 1.0 / v.norm();
    const double alpha = 3.0 * rng.uniform();
    const double c = v.dot(g) / g.norm();
    const double n = eigen_sam_perturbation(g, v, alpha).norm();
    EXPECT_NEAR(n * n, 1.0 + alpha * alpha * (1.0 - c * c), 1e-10);
  }
}

TEST(AlignmentImprovementTest, InsideAdmissibleRangeCosineGrows) {
  Rng rng(11, Stream::Probe);
  const double threshold = std::sqrt(2.0) / 2.0;
  int high = 0, low = 0;
  while (high < 1000 || low < 1000) {
    std::vector<double> gv(5), vv(5);
    for (auto& e : gv) e = rng.normal();
    for (auto& e : vv) e = rng.normal();
    auto g = ParamVector::from(gv), v = ParamVector::from(vv);
    g *= 1.0 / g.norm();
    v *= 1.0 / v.norm();
    const double omega = g.dot(v);
    if (!(omega > 0.0) || omega >= 1.0) continue;
    double alpha;
    if (omega > threshold) {
      if (high >= 1000) continue;
      const Interval range = alpha_admissible_range(omega);
      alpha = range.lower + (range.upper - range.lower) * (0.001 + 0.998 * rng.uniform());
      ASSERT_TRUE(range.contains_open(alpha));
      ++high;
    } else {
      if (low >= 1000) continue;
      alpha = 10.0 * (0.0005 + 0.9995 * rng.uniform());
      ++low;
    }
    const auto p = eigen_sam_perturbation(g, v, alpha);
    EXPECT_GT(p.dot(v) / p.norm(), omega) << "omega " << omega << " alpha " << alpha;
  }
}

TEST(StepTest, SgdOnHalfSquare) {
  const auto r = sgd_step(ParamVector::from({1}), half_square(), plain(Method::Sgd, 0.1, 0), {});
  EXPECT_NEAR(r.x[0], 0.9, 1e-15);
}

TEST(StepTest, SamOnHalfSquare) {
  const auto r = sam_step(ParamVector::from({1}), half_square(), plain(Method::Sam, 0.1, 0.1), {});
  EXPECT_NEAR(r.x[0], 0.89, 1e-15);
}

TEST(StepTest, ReverseSamOnHalfSquare) {
  const auto r = reverse_sam_step(ParamVector::from({1}), half_square(),
                                  plain(Method::ReverseSam, 0.1, 0.1), {});
  EXPECT_NEAR(r.x[0], 0.91, 1e-15);
}

TEST(StepTest, ForwardAndReverseMirrorAboutSgd) {
  const auto o = half_square();
  const auto x = ParamVector::from({1.7});
  const double sgd = sgd_step(x, o, plain(Method::Sgd, 0.05, 0), {}).x[0];
  const double fwd = sam_step(x, o, plain(Method::Sam, 0.05, 0.3), {}).x[0];
  const double rev = reverse_sam_step(x, o, plain(Method::ReverseSam, 0.05, 0.3), {}).x[0];
  EXPECT_NEAR(fwd - sgd, sgd - rev, 1e-15);
  EXPECT_LT(fwd, sgd);
}

TEST(StepTest, EgrHandExample) {
  const auto o = quadratic_oracle(DenseMatrix::diagonal({2, 1}));
  const auto r = egr_step(ParamVector::from({1, 0}), o, plain(Method::Egr, 0.1, 0.1), {});
  EXPECT_NEAR(r.x[0], 0.78, 1e-15);
  EXPECT_EQ(r.x[1], 0.0);
  EXPECT_EQ(r.state.hvp_count, 1u);
}

TEST(StepTest, EgrAtStationaryPointOnlyDecays) {
  const auto o = quadratic_oracle(DenseMatrix::identity(2));
  auto cfg = plain(Method::Egr, 0.1, 0.5);
  cfg.weight_decay = 0.01;
  const auto x = ParamVector::from({0, 0});
  EXPECT_EQ(egr_step(x, o, cfg, {}).x.values(), x.values());
  // Near-stationary with decay: only the decay term acts on x.
  const auto y = ParamVector::from({1e-14, 0});
  const auto r = egr_step(y, o, cfg, {});
  EXPECT_NEAR(r.x[0], 1e-14 - 0.1 * (1e-14 + 0.01 * 1e-14), 1e-28);
}

TEST(StepTest, GradientBelowFloorMatchesSgd) {
  const auto o = half_square();
  const auto x = ParamVector::from({1e-13});
  const auto sgd = sgd_step(x, o, plain(Method::Sgd, 0.1, 0), {}).x;
  for (Method m : {Method::Sam, Method::ReverseSam, Method::EigenSam}) {
    EXPECT_EQ(step(x, o, plain(m, 0.1, 0.5), {}).x.values(), sgd.values()) << to_string(m);
  }
}

TEST(StepTest, MomentumCarriesFirstGradient) {
  const auto o = half_square();
  auto cfg = plain(Method::Sgd, 0.1, 0);
  cfg.momentum = 0.9;
  const auto r1 = sgd_step(ParamVector::from({1}), o, cfg, {});
  const auto r2 = sgd_step(r1.x, o, cfg, r1.state);
  // buf_2 = 0.9 * g(1) + g(0.9) = 1.8
  EXPECT_NEAR(r2.x[0], 0.9 - 0.1 * 1.8, 1e-15);
}

TEST(StepTest, WeightDecayIsDecoupledFromPerturbation) {
  const auto o = half_square();
  auto cfg = plain(Method::Sam, 0.1, 0.1);
  cfg.weight_decay = 0.5;
  const auto r = sam_step(ParamVector::from({1}), o, cfg, {});
  EXPECT_NEAR(r.x[0], 1.0 - 0.1 * (1.1 + 0.5), 1e-15);
  EXPECT_DOUBLE_EQ(r.perturbation[0], 1.0);
}

TEST(ScheduleTest, CosineEndsAtZero) {
  auto cfg = plain(Method::Sgd, 0.3, 0);
  cfg.schedule = Schedule::Cosine;
  cfg.total_steps = 100;
  EXPECT_DOUBLE_EQ(learning_rate(cfg, 0), 0.3);
  EXPECT_NEAR(learning_rate(cfg, 50), 0.15, 1e-15);
  EXPECT_NEAR(learning_rate(cfg, 100), 0.3 * 0.5 * (1.0 + std::cos(std::numbers::pi)), 1e-12);
  EXPECT_NEAR(learning_rate(cfg, 100), 0.0, 1e-12);
}

TEST(ConfigTest, ValidationRejectsOutOfRange) {
  auto bad = [](auto mutate) {
    OptimizerConfig cfg;
    mutate(cfg);
    return cfg;
  };
  EXPECT_THROW(bad([](auto& c) { c.lr = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.rho = -1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.alpha = -0.1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.p = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.q = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.momentum = 1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.grad_floor = 0; }).validate(), ConfigError);
  EXPECT_NO_THROW(OptimizerConfig{}.validate());
  EXPECT_THROW(parse_method("adam"), ConfigError);
}

TEST(ConfigTest, NamedStepRejectsOtherMethod) {
  EXPECT_THROW(sam_step(ParamVector::from({1}), half_square(), plain(Method::Sgd, 0.1, 0), {}),
               ConfigError);
}

TEST(TrajectoryTest, EigenSamWithZeroAlphaMatchesSam) {
  const auto o = mlp_282_oracle();
  const MlpSpec spec{{2, 8, 2}, Activation::Gelu, LossHead::SoftmaxCrossEntropy};
  const auto x0 = init_params(spec, 4);
  auto sam = plain(Method::Sam, 0.1, 0.05);
  sam.momentum = 0.9;
  sam.weight_decay = 5e-5;
  auto eig = sam;
  eig.method = Method::EigenSam;
  eig.alpha = 0.0;
  eig.p = 7;
  eig.q = 3;
  std::size_t hvps = 99;
  const auto a = trajectory(o, sam, x0, 100);
  const auto b = trajectory(o, eig, x0, 100, &hvps);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_LE(max_diff(a[k], b[k]), 1e-12);
  EXPECT_EQ(hvps, 0u);
}

TEST(TrajectoryTest, ZeroRhoReducesToSgd) {
  const auto o = mlp_282_oracle();
  const MlpSpec spec{{2, 8, 2}, Activation::Gelu, LossHead::SoftmaxCrossEntropy};
  const auto x0 = init_params(spec, 2);
  auto base = plain(Method::Sgd, 0.1, 0.0);
  base.momentum = 0.5;
  const auto ref = trajectory(o, base, x0, 100);
  for (Method m : {Method::Sam, Method::ReverseSam, Method::Egr, Method::EigenSam}) {
    auto cfg = base;
    cfg.method = m;
    const auto t = trajectory(o, cfg, x0, 100);
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_LE(max_diff(t[k], ref[k]), 1e-12);
  }
}

TEST(EigenSamTest, RefreshCadenceAndHvpCount) {
  const auto o = mlp_282_oracle();
  const MlpSpec spec{{2, 8, 2}, Activation::Gelu, LossHead::SoftmaxCrossEntropy};
  auto cfg = plain(Method::EigenSam, 0.05, 0.05);
  cfg.p = 3;
  cfg.q = 2;
  ParamVector x = init_params(spec, 0);
  OptimizerState st;
  const std::vector<std::size_t> expected = {4, 4, 4, 8, 8, 8, 12};
  for (std::size_t k = 0; k < expected.size(); ++k) {
    const auto before = st.eigenvector;
    auto r = eigen_sam_step(x, o, cfg, st);
    x = r.x;
    st = r.state;
    EXPECT_EQ(st.hvp_count, expected[k]) << "t1 = " << k + 1;
    ASSERT_TRUE(st.eigenvector.has_value());
    EXPECT_NEAR(st.eigenvector->norm(), 1.0, 1e-12);
    if (k % 3 != 0) {
      EXPECT_EQ(st.eigenvector->values(), before->values());
    }
  }
}

TEST(EigenSamTest, DefaultCadence) {
  // The experiment defaults refresh every 100 steps with 5 power iterations.
  const OptimizerConfig cfg;
  EXPECT_EQ(cfg.p, 100u);
  EXPECT_EQ(cfg.q, 5u);
}

TEST(EigenSamTest, CachedEigenvectorIsTopOfBatchHessian) {
  const auto o = quadratic_oracle(DenseMatrix::diagonal({4, 1, 0.5}));
  auto cfg = plain(Method::EigenSam, 0.01, 0.05);
  cfg.q = 60;
  const auto r = eigen_sam_step(ParamVector::from({1, 1, 1}), o, cfg, {});
  EXPECT_NEAR(std::abs((*r.state.eigenvector)[0]), 1.0, 1e-12);
  EXPECT_NEAR(*r.state.eigenvalue, 4.0, 1e-12);
}

// Batches f_i(x) = 1/2 x^T A x - b_i^T x, sampled uniformly. The full
// objective has smoothness lambda_max(A) and batch-gradient variance
// mean |b_i - b_bar|^2.
TEST(ConvergenceTest, RunningMeanGradientNormWithinBound) {
  const std::size_t d = 4, batches = 8;
  const DenseMatrix a = testing::symmetric_with_spectrum({2.0, 1.0, 0.5, 0.1}, 5);
  Rng rng(8, Stream::Probe);
  std::vector<std::vector<double>> bs(batches, std::vector<double>(d));
  std::vector<double> bbar(d, 0.0);
  for (auto& b : bs)
    for (std::size_t j = 0; j < d; ++j) {
      b[j] = 0.5 * rng.normal();
      bbar[j] += b[j] / batches;
    }
  double sigma2 = 0.0;
  for (const auto& b : bs)
    for (std::size_t j = 0; j < d; ++j) sigma2 += (b[j] - bbar[j]) * (b[j] - bbar[j]) / batches;
  std::vector<LossOracle> family;
  for (const auto& b : bs) family.push_back(quadratic_oracle(a, b));
  const LossOracle full = quadratic_oracle(a, bbar);
  const double beta = 2.0;
  const ParamVector x0 = ParamVector::from({3, -2, 1, 4});
  // f* from the exact minimizer A^{-1} b_bar.
  const Eigen::VectorXd xs = testing::to_eigen(a).ldlt().solve(
      Eigen::Map<const Eigen::VectorXd>(bbar.data(), static_cast<Eigen::Index>(d)));
  const double fstar = full.loss(ParamVector::from(std::vector<double>(xs.data(), xs.data() + d)));
  const double gap = full.loss(x0) - fstar;

  for (double steps : {100.0, 1000.0}) {
    ConvergenceInputs in{beta, gap, sigma2, steps, 0.05, 0.2};
    const ConvergenceBound cb = convergence_bound(in);
    auto cfg = plain(Method::EigenSam, cb.eta, in.rho);
    cfg.alpha = in.alpha;
    cfg.p = 10;
    cfg.q = 5;
    ParamVector x = x0;
    OptimizerState st;
    Rng pick(21, Stream::Sample);
    double acc = 0.0;
    for (std::size_t t = 0; t < static_cast<std::size_t>(steps); ++t) {
      const double gn = full.grad(x).norm();
      acc += gn * gn;
      auto r = eigen_sam_step(x, family[pick.below(batches)], cfg, st);
      x = r.x;
      st = r.state;
    }
    EXPECT_LE(acc / steps, cb.bound) << "T = " << steps;
  }
}

}  // namespace
}  // namespace samlab
