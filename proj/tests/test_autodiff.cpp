#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "samlab/errors.hpp"
#include "samlab/loss_oracle.hpp"
#include "samlab/tape.hpp"
#include "test_support.hpp"

namespace samlab {
namespace {

using testing::fd_gradient;
using testing::polynomial_oracle;
using testing::quadratic_oracle;
using testing::random_vector;

TEST(TensorTest, ShapeMustMatchData) {
  EXPECT_THROW(Tensor(Shape{2, 3}, std::vector<double>(5)), std::invalid_argument);
  EXPECT_NO_THROW(Tensor(Shape{2, 3}, std::vector<double>(6)));
}

TEST(DualTest, NestedDualCarriesSecondDerivative) {
  // f(x) = x^3 at 2 seeded {{x, 1}, {1, 0}}: f' = 12, f'' = 12.
  const Dual2 x(Dual1(2.0, 1.0), Dual1(1.0, 0.0));
  const Dual2 f = x * x * x;
  EXPECT_DOUBLE_EQ(f.v.v, 8.0);
  EXPECT_DOUBLE_EQ(f.v.d, 12.0);
  EXPECT_DOUBLE_EQ(f.d.v, 12.0);
  EXPECT_DOUBLE_EQ(f.d.d, 12.0);
}

TEST(ParamVectorTest, LayoutPartitionsTheVector) {
  const ParamLayout layout({{"W", {2, 3}}, {"b", {3}}});
  EXPECT_EQ(layout.size(), 9u);
  EXPECT_EQ(layout.find("b").offset, 6u);
  std::size_t next = 0;
  for (const auto& e : layout.entries()) {
    EXPECT_EQ(e.offset, next);
    next += numel(e.shape);
  }
}

TEST(ParamVectorTest, FlattenInvertsUnflatten) {
  const MlpSpec spec{{3, 4, 2}, Activation::Gelu, LossHead::SoftmaxCrossEntropy};
  const ParamVector x = init_params(spec, 3);
  const ParamVector y = ParamVector::flatten(x.layout(), x.unflatten());
  EXPECT_EQ(x, y);
}

TEST(LossTest, HalfSquareAtTwo) {
  const auto o = polynomial_oracle(1, {{0.5, {2}}});
  EXPECT_DOUBLE_EQ(o.loss(ParamVector::from({2.0})), 2.0);
}

TEST(LossTest, EqualLogitsGiveLogK) {
  for (std::size_t k : {2u, 3u, 10u}) {
    const MlpSpec spec{{2, 3, k}, Activation::Gelu, LossHead::SoftmaxCrossEntropy};
    const auto model = std::make_shared<const Mlp>(spec);
    const Dataset d = gen_synthetic(20, 2, k, 1.0, 1);
    const LossOracle o(model, std::make_shared<const Batch>(full_batch(d)));
    const ParamVector zero(model->layout());
    EXPECT_NEAR(o.loss(zero), std::log(static_cast<double>(k)), 1e-15);
  }
}

double gelu_reference(double z) {
  return 0.5 * z * (1.0 + std::tanh(std::sqrt(2.0 / std::numbers::pi) * (z + 0.044715 * z * z * z)));
}

TEST(LossTest, MlpMatchesStraightLineForwardPass) {
  const MlpSpec spec{{2, 8, 2}, Activation::Gelu, LossHead::SoftmaxCrossEntropy};
  const ParamVector x = init_params(spec, 0);
  const Dataset d = gen_synthetic(16, 2, 2, 2.0, 0);
  const LossOracle o(std::make_shared<const Mlp>(spec), std::make_shared<const Batch>(full_batch(d)));

  const auto& L = *x.layout();
  auto w1 = [&](std::size_t i, std::size_t j) { return x[L.find("W1").offset + i * 8 + j]; };
  auto w2 = [&](std::size_t i, std::size_t j) { return x[L.find("W2").offset + i * 2 + j]; };
  auto b1 = [&](std::size_t j) { return x[L.find("b1").offset + j]; };
  auto b2 = [&](std::size_t j) { return x[L.find("b2").offset + j]; };
  double total = 0.0;
  for (std::size_t r = 0; r < d.size(); ++r) {
    double h[8];
    for (std::size_t j = 0; j < 8; ++j) {
      h[j] = gelu_reference(d.inputs.at(r, 0) * w1(0, j) + d.inputs.at(r, 1) * w1(1, j) + b1(j));
    }
    double z[2];
    for (std::size_t c = 0; c < 2; ++c) {
      z[c] = b2(c);
      for (std::size_t j = 0; j < 8; ++j) z[c] += h[j] * w2(j, c);
    }
    const double lse = std::log(std::exp(z[0]) + std::exp(z[1]));
    total += lse - z[d.labels[r]];
  }
  EXPECT_NEAR(o.loss(x), total / d.size(), 1e-13);
}

TEST(LossTest, NonFiniteLossIsAnError) {
  const auto o = polynomial_oracle(1, {{1.0, {2}}});
  EXPECT_THROW(o.loss(ParamVector::from({1e200})), NonFiniteLoss);
  EXPECT_THROW(o.grad(ParamVector::from({1e200})), NonFiniteLoss);
}

TEST(LossTest, WrongLengthIsRejected) {
  const auto o = polynomial_oracle(2, {{1.0, {2, 0}}});
  EXPECT_THROW(o.loss(ParamVector::from({1.0})), std::invalid_argument);
}

TEST(GradTest, HalfSquareAtThree) {
  const auto o = polynomial_oracle(1, {{0.5, {2}}});
  EXPECT_DOUBLE_EQ(o.grad(ParamVector::from({3.0}))[0], 3.0);
}

TEST(GradTest, VanishesAtInterpolatingMinimumOfMse) {
  const MlpSpec spec{{2, 3, 2}, Activation::Gelu, LossHead::MeanSquaredError};
  const auto model = std::make_shared<const Mlp>(spec);
  Dataset d = gen_synthetic(6, 2, 2, 1.0, 4);
  for (int& y : d.labels) y = 0;
  const LossOracle o(model, std::make_shared<const Batch>(full_batch(d)));
  ParamVector x = init_params(spec, 4);
  const auto& w2 = x.layout()->find("W2");
  for (std::size_t i = 0; i < numel(w2.shape); ++i) x[w2.offset + i] = 0.0;
  const auto& b2 = x.layout()->find("b2");
  x[b2.offset] = 1.0;
  x[b2.offset + 1] = 0.0;
  EXPECT_EQ(o.loss(x), 0.0);
  const ParamVector g = o.grad(x);
  for (double gi : g.values()) EXPECT_EQ(gi, 0.0);
}

TEST(GradTest, ZooMatchesCentralDifferences) {
  for (const auto& entry : testing::model_zoo()) {
    const LossOracle o(entry.model, entry.batch);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const ParamVector x = random_vector(entry.model->layout(), 100 + s, 0.7);
      const ParamVector g = o.grad(x);
      const double err = (g - fd_gradient(o, x)).norm() / (1.0 + g.norm());
      EXPECT_LT(err, 1e-5) << "widths " << entry.spec.widths.size() << " point " << s;
    }
  }
}

TEST(HvpTest, DiagonalQuadraticIsExact) {
  const auto o = quadratic_oracle(DenseMatrix::diagonal({2.0, 3.0}));
  const ParamVector hv = o.hvp(ParamVector::from({0.3, -0.7}), ParamVector::from({1.0, 1.0}));
  EXPECT_EQ(hv[0], 2.0);
  EXPECT_EQ(hv[1], 3.0);
}

TEST(HvpTest, FiniteDifferenceOnQuartic) {
  // Hessian of x^4/4 is 3x^2 = 3 at x = 1, so H v = 6 for v = 2.
  const auto o = polynomial_oracle(1, {{0.25, {4}}}, DerivativeMode::FiniteDifference);
  EXPECT_NEAR(o.hvp(ParamVector::from({1.0}), ParamVector::from({2.0}))[0], 6.0, 1e-8);
}

TEST(HvpTest, EigenvectorIsScaled) {
  DenseMatrix a(2, 2);
  a(0, 0) = 2.0;
  a(0, 1) = a(1, 0) = 1.0;
  a(1, 1) = 2.0;
  const auto o = quadratic_oracle(a);
  const ParamVector v = ParamVector::from({1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)});
  const ParamVector hv = o.hvp(ParamVector::from({0.5, 2.0}), v);
  EXPECT_NEAR(hv[0], 3.0 * v[0], 1e-15);
  EXPECT_NEAR(hv[1], 3.0 * v[1], 1e-15);
}

TEST(HvpTest, FiniteDifferenceRejectsZeroDirection) {
  const auto o = polynomial_oracle(1, {{0.25, {4}}}, DerivativeMode::FiniteDifference);
  EXPECT_THROW(o.hvp(ParamVector::from({1.0}), ParamVector::from({0.0})), ZeroDirection);
}

TEST(HvpTest, SymmetricOnZoo) {
  for (const auto& entry : testing::model_zoo()) {
    const LossOracle o(entry.model, entry.batch);
    const auto layout = entry.model->layout();
    for (std::uint64_t s = 0; s < 5; ++s) {
      const ParamVector x = random_vector(layout, 200 + s, 0.7);
      const ParamVector u = random_vector(layout, 300 + s);
      const ParamVector v = random_vector(layout, 400 + s);
      const double gap = std::abs(v.dot(o.hvp(x, u)) - u.dot(o.hvp(x, v)));
      EXPECT_LT(gap, 1e-6 * (1.0 + u.norm() * v.norm()));
    }
  }
}

TEST(HvpTest, LinearInDirection) {
  const LossOracle o = testing::mlp_282_oracle();
  const auto layout = o.model().layout();
  const ParamVector x = random_vector(layout, 1, 0.7);
  const ParamVector u = random_vector(layout, 2);
  const ParamVector v = random_vector(layout, 3);
  const double a = 1.7, b = -0.4;
  const ParamVector lhs = o.hvp(x, a * u + b * v);
  const ParamVector rhs = a * o.hvp(x, u) + b * o.hvp(x, v);
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-8);
}

TEST(HvpTest, ExactAndFiniteDifferenceAgreeOnZoo) {
  for (const auto& entry : testing::model_zoo()) {
    const LossOracle exact(entry.model, entry.batch);
    const LossOracle fd = exact.with_mode(DerivativeMode::FiniteDifference);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const ParamVector x = random_vector(entry.model->layout(), 500 + s, 0.7);
      const ParamVector v = random_vector(entry.model->layout(), 600 + s);
      const ParamVector a = exact.hvp(x, v);
      EXPECT_LT((a - fd.hvp(x, v)).norm() / a.norm(), 1e-4);
    }
  }
}

TEST(ThirdTest, CubicInOneDimension) {
  for (auto mode : {DerivativeMode::Exact, DerivativeMode::FiniteDifference}) {
    const auto o = polynomial_oracle(1, {{1.0, {3}}}, mode);
    EXPECT_NEAR(o.third_directional(ParamVector::from({2.0}), ParamVector::from({1.0}))[0], 6.0,
                1e-6);
  }
}

TEST(ThirdTest, QuadraticHasNoThirdDerivative) {
  const auto o = quadratic_oracle(testing::random_symmetric(4, 1), {0.1, 0.2, 0.3, 0.4});
  const ParamVector t = o.third_directional(ParamVector::from({1, -2, 3, 0.5}),
                                            ParamVector::from({0.3, 0.1, -1, 2}));
  for (double v : t.values()) EXPECT_EQ(v, 0.0);
}

TEST(ThirdTest, MixedMonomial) {
  // u^T H u = 2 x2 for f = x1^2 x2 and u = e1, whose gradient is (0, 2).
  for (auto mode : {DerivativeMode::Exact, DerivativeMode::FiniteDifference}) {
    const auto o = polynomial_oracle(2, {{1.0, {2, 1}}}, mode);
    for (const auto& x : {ParamVector::from({0.0, 0.0}), ParamVector::from({1.5, -3.0})}) {
      const ParamVector t = o.third_directional(x, ParamVector::from({1.0, 0.0}));
      EXPECT_NEAR(t[0], 0.0, 1e-6);
      EXPECT_NEAR(t[1], 2.0, 1e-6);
    }
  }
}

TEST(ThirdTest, ZeroDirectionIsRejected) {
  for (auto mode : {DerivativeMode::Exact, DerivativeMode::FiniteDifference}) {
    const auto o = polynomial_oracle(1, {{1.0, {3}}}, mode);
    EXPECT_THROW(o.third_directional(ParamVector::from({1.0}), ParamVector::from({0.0})),
                 ZeroDirection);
  }
}

TEST(ThirdTest, DenseProbesAreLimitedInDimension) {
  std::vector<int> powers(513, 0);
  powers[0] = 3;
  const auto o = polynomial_oracle(513, {{1.0, powers}}, DerivativeMode::FiniteDifference);
  ParamVector x(o.model().layout());
  ParamVector u = x;
  u[0] = 1.0;
  EXPECT_THROW(o.third_directional(x, u), DimensionTooLarge);
  EXPECT_NEAR(o.third_directional_along(x, u, u), 6.0, 1e-6);
}

TEST(ThirdTest, ModesAgreeOnMlp) {
  const LossOracle exact = testing::mlp_282_oracle();
  const LossOracle fd = exact.with_mode(DerivativeMode::FiniteDifference);
  const auto layout = exact.model().layout();
  const ParamVector x = random_vector(layout, 7, 0.7);
  const ParamVector u = random_vector(layout, 8);
  const ParamVector a = exact.third_directional(x, u);
  EXPECT_LT((a - fd.third_directional(x, u)).norm() / a.norm(), 1e-4);
  const ParamVector w = random_vector(layout, 9);
  EXPECT_NEAR(exact.third_directional_along(x, u, w), a.dot(w), 1e-10 * (1 + std::abs(a.dot(w))));
  EXPECT_NEAR(fd.third_directional_along(x, u, w), a.dot(w), 1e-4 * (1 + std::abs(a.dot(w))));
}

TEST(DeterminismTest, RepeatedQueriesAreBitIdentical) {
  const LossOracle o = testing::mlp_282_oracle();
  const auto layout = o.model().layout();
  const ParamVector x = random_vector(layout, 11, 0.7);
  const ParamVector v = random_vector(layout, 12);
  const Tape<double> t1 = o.record(x);
  const Tape<double> t2 = o.record(x);
  ASSERT_EQ(t1.size(), t2.size());
  for (NodeId i = 0; i < t1.size(); ++i) {
    EXPECT_EQ(t1.node(i).op, t2.node(i).op);
    EXPECT_EQ(t1.node(i).inputs, t2.node(i).inputs);
    EXPECT_EQ(t1.value(i).data, t2.value(i).data);
  }
  EXPECT_EQ(o.loss(x), o.loss(x));
  EXPECT_EQ(o.grad(x), o.grad(x));
  EXPECT_EQ(o.hvp(x, v), o.hvp(x, v));
  EXPECT_EQ(o.third_directional(x, v), o.third_directional(x, v));
}

TEST(TapeTest, NodesAreTopologicallyOrdered) {
  const LossOracle o = testing::mlp_282_oracle();
  const Tape<double> t = o.record(init_params({{2, 8, 2}, Activation::Gelu, LossHead::SoftmaxCrossEntropy}, 0));
  for (NodeId i = 0; i < t.size(); ++i) {
    for (NodeId in : t.node(i).inputs) EXPECT_LT(in, i);
  }
}

TEST(TapeTest, ReluGradientIsAStep) {
  Tape<double> tape;
  const NodeId x = tape.leaf(Tensor(Shape{3}, {-1.0, 0.5, 2.0}));
  const NodeId y = tape.sum(tape.relu(x));
  EXPECT_DOUBLE_EQ(tape.value(y).data[0], 2.5);
  const Tensor g = tape.gradient(y, x);
  EXPECT_EQ(g.data, (std::vector<double>{0.0, 1.0, 1.0}));
}

TEST(TapeTest, GeluSlopeMatchesDifferences) {
  for (double z : {-2.0, -0.3, 0.0, 0.8, 3.0}) {
    Tape<double> tape;
    const NodeId x = tape.leaf(Tensor(Shape{1}, {z}));
    const NodeId y = tape.sum(tape.gelu(x));
    EXPECT_NEAR(tape.value(y).data[0], gelu_reference(z), 1e-15);
    const double h = 1e-6;
    const double fd = (gelu_reference(z + h) - gelu_reference(z - h)) / (2 * h);
    EXPECT_NEAR(tape.gradient(y, x).data[0], fd, 1e-8);
  }
}

}  // namespace
}  // namespace samlab
