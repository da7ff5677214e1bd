/*
 Copyright 2026 The mfpmp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <cmath>
#include <limits>

#include "test_support.hpp"

namespace mfpmp {
namespace {

using testing::affine_cloud;
using testing::linear_problem;
using testing::scalar;
using testing::vec;

ControlProblem scalar_lqr(HorizonSpec h) { return linear_problem(scalar(0), scalar(1), scalar(1), scalar(1), h); }

EnsembleState single(const Vector& x, const Vector& p) { return EnsembleState(0.0, Matrix(x), Matrix(p)); }

TEST(RhsBridge, ScalarDiscountedSingleParticle) {
  const ControlProblem pr = scalar_lqr(DiscountedInfinite{0.5});
  const EnsembleState e = single(vec({2.0}), vec({1.0}));
  const BridgeCoefficients bc = build_bridge(e, 0.1, Matrix::Identity(1, 1));
  const PhaseDerivative d = rhs_bridge(e, pr, bc, TimeMode::forward_discounted);
  EXPECT_DOUBLE_EQ(d.dX(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(d.dP(0, 0), 1.5);
}

TEST(RhsBridge, ScalarBackwardSingleParticle) {
  const ControlProblem pr = scalar_lqr(FiniteHorizon{1.0});
  const EnsembleState e = single(vec({2.0}), vec({1.0}));
  const BridgeCoefficients bc = build_bridge(e, 0.1, Matrix::Identity(1, 1));
  const PhaseDerivative d = rhs_bridge(e, pr, bc, TimeMode::backward);
  EXPECT_DOUBLE_EQ(d.dX(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(d.dP(0, 0), -2.0);
}

TEST(RhsBridge, TwoParticleCoupling) {
  const ControlProblem pr = scalar_lqr(DiscountedInfinite{0.2});
  Matrix x(1, 2), p(1, 2);
  x << -0.3, 0.4;
  p << 0.5, -1.0;
  const EnsembleState e(0.0, x, p);
  const BridgeCoefficients bc = build_bridge(e, 0.2, Matrix::Identity(1, 1));
  const PhaseDerivative d = rhs_bridge(e, pr, bc, TimeMode::forward_discounted);
  const Matrix& m = bc.generator;
  for (long i = 0; i < 2; ++i) {
    const double mx = m(i, 0) * x(0, 0) + m(i, 1) * x(0, 1);
    const double mp = m(i, 0) * p(0, 0) + m(i, 1) * p(0, 1);
    EXPECT_NEAR(d.dX(0, i), -p(0, i) - mx, 1e-14);
    EXPECT_NEAR(d.dP(0, i), -0.2 * p(0, i) + x(0, i) + mp, 1e-14);
  }
  // particles are pulled apart along x
  EXPECT_LT(d.dX(0, 0) + p(0, 0), 0.0);
  EXPECT_GT(d.dX(0, 1) + p(0, 1), 0.0);
}

TEST(RhsBridge, SingleParticleReducesToClassical) {
  const ControlProblem pr = make_pendulum({.horizon = FiniteHorizon{1.0}});
  GaussianSampler rng(7);
  for (int k = 0; k < 20; ++k) {
    const Vector x = rng.normal_vector(2), p = rng.normal_vector(2);
    const EnsembleState e = single(x, p);
    const BridgeCoefficients bc = build_bridge(e, 0.05, pr.sigma());
    const PhaseDerivative d = rhs_bridge(e, pr, bc, TimeMode::backward);
    const auto [dx, dp] = rhs_classical_pmp(x, p, pr);
    EXPECT_LT((d.dX.col(0) - dx).norm(), 1e-14);
    EXPECT_LT((d.dP.col(0) - dp).norm(), 1e-14);
  }
}

TEST(RhsBridge, ConstantMomentaUnaffectedByGenerator) {
  const ControlProblem pr = scalar_lqr(DiscountedInfinite{1.0});
  EnsembleState e = gaussian_ensemble(vec({0.0}), 1.0, 40, 8);
  e.P.setConstant(0.7);
  const BridgeCoefficients bc = build_bridge(e, 0.1, Matrix::Identity(1, 1));
  const PhaseDerivative with = rhs_bridge(e, pr, bc, TimeMode::forward_discounted);
  const PhaseDerivative without = rhs_mean_field(e, pr, {}, TimeMode::forward_discounted);
  EXPECT_LT((with.dP - without.dP).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(RhsBridge, ModeMismatchThrows) {
  const ControlProblem finite = scalar_lqr(FiniteHorizon{1.0});
  const ControlProblem disc = scalar_lqr(DiscountedInfinite{1.0});
  const EnsembleState e = single(vec({1.0}), vec({1.0}));
  const BridgeCoefficients bc = build_bridge(e, 0.1, Matrix::Identity(1, 1));
  EXPECT_THROW(rhs_bridge(e, finite, bc, TimeMode::forward_discounted), InvalidArgument);
  EXPECT_THROW(rhs_bridge(e, disc, bc, TimeMode::backward), InvalidArgument);
}

TEST(RhsBridge, DimensionChecks) {
  const ControlProblem pr = scalar_lqr(DiscountedInfinite{1.0});
  const EnsembleState e2 = single(vec({1.0, 2.0}), vec({0.0, 0.0}));
  EXPECT_THROW(rhs_mean_field(e2, pr, {}, TimeMode::forward_discounted), DimensionError);
  const EnsembleState e = gaussian_ensemble(vec({0.0}), 1.0, 3, 1);
  const BridgeCoefficients bc = build_bridge(single(vec({0.0}), vec({0.0})), 0.1, Matrix::Identity(1, 1));
  EXPECT_THROW(rhs_bridge(e, pr, bc, TimeMode::forward_discounted), DimensionError);
}

// dX = dH/dp and dP = -dH/dx for the zero gauge.
TEST(RhsMeanField, MatchesHamiltonianDerivatives) {
  const ControlProblem pr = make_pendulum({.horizon = FiniteHorizon{1.0}});
  GaussianSampler rng(9);
  const Vector zero = Vector::Zero(2);
  auto h = [&](const Vector& x, const Vector& p) { return hamiltonian_density(x, p, zero, zero, 0.0, pr); };
  for (int k = 0; k < 10; ++k) {
    const Vector x = rng.normal_vector(2), p = rng.normal_vector(2);
    const PhaseDerivative d = rhs_mean_field(single(x, p), pr, {}, TimeMode::backward);
    for (long j = 0; j < 2; ++j) {
      const double step = 1e-5 * (1.0 + std::abs(x(j)));
      Vector xp = x, xm = x, pp = p, pm = p;
      xp(j) += step;
      xm(j) -= step;
      pp(j) += step;
      pm(j) -= step;
      const double hx = (h(xp, p) - h(xm, p)) / (2.0 * step);
      const double hp = (h(x, pp) - h(x, pm)) / (2.0 * step);
      EXPECT_NEAR(d.dX(j, 0), hp, 1e-6 * (1.0 + std::abs(hp)));
      EXPECT_NEAR(d.dP(j, 0), -hx, 1e-6 * (1.0 + std::abs(hx)));
    }
  }
}

TEST(RhsRegression, ExactAffineCloudMatchesZeroGauge) {
  Matrix a_dyn(2, 2);
  a_dyn << 0.5, 0.2, 0.2, -0.3;
  const ControlProblem pr = linear_problem(a_dyn, Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                           Matrix::Identity(2, 2), DiscountedInfinite{0.5});
  Matrix a(2, 2);
  a << 1.2, 0.1, 0.1, 0.9;
  const EnsembleState e = affine_cloud(a, vec({0.3, -0.2}), 30, 10);
  const AffineGradientModel model = fit_affine_gradient(e);
  const PhaseDerivative reg = rhs_regression_constG(e, pr, model, TimeMode::forward_discounted);
  const PhaseDerivative ref = rhs_mean_field(e, pr, {}, TimeMode::forward_discounted);
  EXPECT_LT((reg.dX - ref.dX).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((reg.dP - ref.dP).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(RhsRegression, ScalarFormulaWithScore) {
  const ControlProblem pr = scalar_lqr(DiscountedInfinite{0.5});
  const EnsembleState e = single(vec({2.0}), vec({1.0}));
  const AffineGradientModel model{scalar(0.5), vec({0.25}), true};
  const Matrix score = Matrix::Constant(1, 1, 0.1);
  const PhaseDerivative d = rhs_regression_constG(e, pr, model, TimeMode::forward_discounted, &score);
  // y = 1.25, dX = -y - s, dP = -gamma P + x + A (y - P) + A s
  EXPECT_DOUBLE_EQ(d.dX(0, 0), -1.35);
  EXPECT_DOUBLE_EQ(d.dP(0, 0), -0.5 + 2.0 + 0.5 * 0.25 + 0.5 * 0.1);
}

TEST(RhsRegression, RejectsStateDependentControlMatrix) {
  const ControlProblem pr = make_pendulum();
  const EnsembleState e = pendulum_initial_ensemble(5, 0);
  EXPECT_THROW(rhs_regression_constG(e, pr, fit_affine_gradient(e), TimeMode::forward_discounted), InvalidArgument);
}

TEST(GaugeBeta, ZeroAndDecoupling) {
  const ControlProblem pr = linear_problem(scalar(0), scalar(1), scalar(2), scalar(1), FiniteHorizon{1.0});
  Matrix x(1, 2), p(1, 2);
  x << 1.0, -1.0;
  p << 0.5, 3.0;
  const EnsembleState e(0.0, x, p);
  EXPECT_TRUE(gauge_beta(e, pr, ZeroGauge{}).isZero(0.0));
  const Matrix b = gauge_beta(e, pr, DecouplingGauge{});
  EXPECT_DOUBLE_EQ(b(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(b(0, 1), -6.0);
}

TEST(GaugeBeta, NaturalNeedsBridge) {
  const ControlProblem pr = scalar_lqr(FiniteHorizon{1.0});
  const EnsembleState e = gaussian_ensemble(vec({0.0}), 1.0, 10, 11);
  EXPECT_THROW(gauge_beta(e, pr, NaturalScoreGauge{}), InvalidArgument);
  const BridgeCoefficients bc = build_bridge(e, 0.1, Matrix::Identity(1, 1));
  const Matrix b = gauge_beta(e, pr, NaturalScoreGauge{}, &bc);
  EXPECT_LT((b - e.X * bc.generator.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(GaugeBeta, CombinedAddsReferenceControl) {
  const ControlProblem pr = scalar_lqr(FiniteHorizon{1.0});
  const EnsembleState e = gaussian_ensemble(vec({0.0}), 1.0, 6, 12);
  const BridgeCoefficients bc = build_bridge(e, 0.1, Matrix::Identity(1, 1));
  CombinedGauge g;
  g.reference_control = [](const Vector& x) -> Vector { return -2.0 * x; };
  const Matrix b = gauge_beta(e, pr, g, &bc);
  const Matrix expected = e.X * bc.generator.transpose() - e.P + 2.0 * e.X;
  EXPECT_LT((b - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(GaugeName, AllVariants) {
  EXPECT_STREQ(gauge_name(ZeroGauge{}), "zero");
  EXPECT_STREQ(gauge_name(NaturalScoreGauge{}), "natural");
  EXPECT_STREQ(gauge_name(DecouplingGauge{}), "decoupling");
  EXPECT_STREQ(gauge_name(CombinedGauge{}), "combined");
}

TEST(EulerStep, Example) {
  const EnsembleState e(0.5, Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0));
  const PhaseDerivative d{Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, -1.0)};
  const EnsembleState n = euler_step(e, d, 0.1);
  EXPECT_DOUBLE_EQ(n.t, 0.6);
  EXPECT_DOUBLE_EQ(n.X(0, 0), 1.3);
  EXPECT_DOUBLE_EQ(n.P(0, 0), 1.9);
}

TEST(EulerStep, Errors) {
  const EnsembleState e(0.0, Matrix::Zero(2, 3), Matrix::Zero(2, 3));
  const PhaseDerivative ok{Matrix::Ones(2, 3), Matrix::Ones(2, 3)};
  EXPECT_THROW(euler_step(e, ok, 0.0), InvalidArgument);
  EXPECT_THROW(euler_step(e, ok, -1.0), InvalidArgument);
  EXPECT_THROW(euler_step(e, PhaseDerivative{Matrix::Ones(2, 2), Matrix::Ones(2, 3)}, 0.1), DimensionError);
  PhaseDerivative bad = ok;
  bad.dP(1, 2) = std::numeric_limits<double>::infinity();
  try {
    euler_step(e, bad, 0.1, 42);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& err) {
    EXPECT_EQ(err.step(), 42);
  }
}

}  // namespace
}  // namespace mfpmp
