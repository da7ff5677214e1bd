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
#include <numbers>

#include "test_support.hpp"

namespace mfpmp {
namespace {

using testing::linear_problem;
using testing::scalar;
using testing::vec;

const ControlProblem& pendulum() {
  static const ControlProblem p = make_pendulum();
  return p;
}

TEST(EvalControl, IdentityMatrices) {
  const auto pr = linear_problem(Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                 Matrix::Identity(2, 2));
  EXPECT_TRUE(eval_control(vec({0, 0}), vec({1, 2}), pr).isApprox(vec({-1, -2})));
}

TEST(EvalControl, PendulumAtZeroAngle) {
  const Vector u = eval_control(vec({0, 0}), vec({0.3, 0.5}), pendulum());
  ASSERT_EQ(u.size(), 1);
  EXPECT_DOUBLE_EQ(u(0), -0.5);
}

TEST(EvalControl, ScalarWeight) {
  const auto pr = linear_problem(scalar(0), scalar(1), scalar(2), scalar(1));
  EXPECT_DOUBLE_EQ(eval_control(vec({0.7}), vec({3}), pr)(0), -6.0);
}

TEST(EvalControl, DimensionMismatchThrows) {
  const auto pr = linear_problem(scalar(0), scalar(1), scalar(1), scalar(1));
  EXPECT_THROW(eval_control(vec({1, 2}), vec({1}), pr), DimensionError);
  EXPECT_THROW(eval_control(vec({1}), vec({1, 2}), pr), DimensionError);
}

TEST(EvalControl, LinearInMomentum) {
  GaussianSampler rng(3);
  for (int k = 0; k < 50; ++k) {
    const Vector x = rng.normal_vector(2), p1 = rng.normal_vector(2), p2 = rng.normal_vector(2);
    const double a = rng.normal();
    const Vector lhs = eval_control(x, a * p1 + p2, pendulum());
    const Vector rhs = a * eval_control(x, p1, pendulum()) + eval_control(x, p2, pendulum());
    EXPECT_NEAR((lhs - rhs).norm(), 0.0, 1e-12 * (1.0 + rhs.norm()));
  }
}

TEST(WeightedNorm, Examples) {
  const auto pr2 = linear_problem(Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                  Matrix::Identity(2, 2));
  EXPECT_DOUBLE_EQ(weighted_norm_sq_R(vec({3, 4}), pr2), 25.0);
  const auto pr1 = linear_problem(scalar(0), scalar(1), scalar(2), scalar(1));
  EXPECT_DOUBLE_EQ(weighted_norm_sq_R(vec({4}), pr1), 8.0);
  EXPECT_DOUBLE_EQ(weighted_norm_sq_R(vec({0}), pr1), 0.0);
  EXPECT_THROW(weighted_norm_sq_R(vec({1, 2}), pr1), DimensionError);
}

TEST(ControlQuadratic, Examples) {
  const auto pr2 = linear_problem(Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                  Matrix::Identity(2, 2));
  EXPECT_DOUBLE_EQ(control_quadratic(vec({0, 0}), vec({1, 1}), pr2), 2.0);
  EXPECT_NEAR(control_quadratic(vec({std::numbers::pi / 2, 0.3}), vec({1.5, -2.0}), pendulum()), 0.0, 1e-30);
  const auto pr1 = linear_problem(scalar(0), scalar(2), scalar(3), scalar(1));
  EXPECT_DOUBLE_EQ(control_quadratic(vec({0}), vec({1}), pr1), 12.0);
}

TEST(ControlQuadratic, MatchesWeightedNormOfControl) {
  Matrix g(3, 2);
  g << 1, 2, -1, 0.5, 0.3, 1;
  Matrix r(2, 2);
  r << 2, 0.5, 0.5, 1;
  const auto pr = linear_problem(Matrix::Zero(3, 3), g, r, Matrix::Identity(3, 3));
  GaussianSampler rng(5);
  for (int k = 0; k < 100; ++k) {
    const Vector x = rng.normal_vector(3), p = rng.normal_vector(3);
    const Vector rgp = r * g.transpose() * p;
    const double lhs = weighted_norm_sq_R(rgp, pr);
    const double rhs = control_quadratic(x, p, pr);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(rhs));
  }
}

TEST(HamiltonianDensity, OnlyControlTermSurvives) {
  const auto pr = linear_problem(Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                 Matrix::Zero(2, 2));
  const double h = hamiltonian_density(vec({0.4, -1}), vec({1, 0}), vec({0, 0}), vec({7, 8}), 0.0, pr);
  EXPECT_DOUBLE_EQ(h, -0.5);
}

TEST(HamiltonianDensity, DriftAndCostWithoutControl) {
  ProblemDefinition def;
  def.dim_x = 2;
  def.dim_u = 1;
  def.drift = [](const Vector&) -> Vector { return testing::vec({1, 0}); };
  def.drift_jacobian = [](const Vector&) -> Matrix { return Matrix::Zero(2, 2); };
  def.control_matrix = [](const Vector&) -> Matrix { return Matrix::Zero(2, 1); };
  def.running_cost = [](const Vector&) { return 1.0; };
  def.running_cost_grad = [](const Vector&) -> Vector { return Vector::Zero(2); };
  def.weight_R = scalar(1);
  def.constant_control_matrix = true;
  const ControlProblem pr(def);
  const Vector p = vec({1, 0});
  EXPECT_DOUBLE_EQ(hamiltonian_density(vec({0, 0}), p, vec({0, 0}), p, 0.0, pr), 2.0);
}

TEST(HamiltonianDensity, GaugeTermVanishesOnConstraint) {
  GaussianSampler rng(8);
  for (int k = 0; k < 20; ++k) {
    const Vector x = rng.normal_vector(2), p = rng.normal_vector(2), beta = rng.normal_vector(2);
    const double with_beta = hamiltonian_density(x, p, beta, p, 0.0, pendulum());
    const double without = hamiltonian_density(x, p, Vector::Zero(2), p, 0.0, pendulum());
    EXPECT_DOUBLE_EQ(with_beta, without);
  }
}

TEST(HamiltonianDensity, ReducesToClassicalHamiltonian) {
  GaussianSampler rng(9);
  for (int k = 0; k < 20; ++k) {
    const Vector x = rng.normal_vector(2), p = rng.normal_vector(2);
    const double classical =
        -0.5 * control_quadratic(x, p, pendulum()) + p.dot(pendulum().drift(x)) + pendulum().running_cost(x);
    EXPECT_DOUBLE_EQ(hamiltonian_density(x, p, Vector::Zero(2), p, 0.0, pendulum()), classical);
  }
}

TEST(ControlProblem, RejectsInvalidDefinitions) {
  const Matrix z = Matrix::Zero(1, 1);
  EXPECT_THROW(linear_problem(z, scalar(1), scalar(-1), scalar(1)), InvalidArgument);
  Matrix r(2, 2);
  r << 1, 0.5, 0.2, 1;  // not symmetric
  EXPECT_THROW(linear_problem(Matrix::Zero(2, 2), Matrix::Identity(2, 2), r, Matrix::Identity(2, 2)),
               InvalidArgument);
  EXPECT_THROW(linear_problem(z, scalar(1), scalar(1), scalar(1), DiscountedInfinite{1.0}, scalar(-0.1)),
               InvalidArgument);
  EXPECT_THROW(linear_problem(z, scalar(1), scalar(1), scalar(1), FiniteHorizon{0.0}), InvalidArgument);
  EXPECT_THROW(linear_problem(z, scalar(1), scalar(1), scalar(1), DiscountedInfinite{0.0}), InvalidArgument);

  ProblemDefinition def;
  def.dim_x = 1;
  def.dim_u = 1;
  EXPECT_THROW(ControlProblem{def}, InvalidArgument);
}

TEST(ControlProblem, ZeroDiffusionIsLegal) {
  const auto pr = linear_problem(scalar(0), scalar(1), scalar(1), scalar(1), DiscountedInfinite{1.0}, scalar(0));
  EXPECT_EQ(pr.sigma()(0, 0), 0.0);
}

TEST(ControlProblem, HorizonAccessors) {
  const auto fin = linear_problem(scalar(0), scalar(1), scalar(1), scalar(1), FiniteHorizon{2.5});
  EXPECT_DOUBLE_EQ(fin.horizon_T(), 2.5);
  EXPECT_THROW(fin.discount(), InvalidArgument);
  const auto disc = linear_problem(scalar(0), scalar(1), scalar(1), scalar(1), DiscountedInfinite{0.3});
  EXPECT_DOUBLE_EQ(disc.discount(), 0.3);
  EXPECT_THROW(disc.horizon_T(), InvalidArgument);
}

TEST(ControlProblem, CostsAreNonNegative) {
  GaussianSampler rng(2);
  for (const auto& [id, desc] : benchmark_catalog()) {
    const Benchmark b = make_benchmark(id, {{"horizon", "finite"}, {"T", "1"}});
    for (int k = 0; k < 50; ++k) {
      const Vector x = 3.0 * rng.normal_vector(b.problem.dim_x());
      EXPECT_GE(b.problem.running_cost(x), 0.0) << id;
      EXPECT_GE(b.problem.terminal_cost(x), 0.0) << id;
    }
  }
}

TEST(EnsembleState, ValidatesShapesAndValues) {
  EXPECT_THROW(EnsembleState(0.0, Matrix::Zero(2, 3), Matrix::Zero(2, 2)), DimensionError);
  EXPECT_THROW(EnsembleState(0.0, Matrix::Zero(2, 0), Matrix::Zero(2, 0)), InvalidArgument);
  Matrix bad = Matrix::Zero(1, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(EnsembleState(0.0, bad, Matrix::Zero(1, 2)), NumericalError);
  const EnsembleState ok(1.5, Matrix::Ones(3, 4), Matrix::Zero(3, 4));
  EXPECT_EQ(ok.size(), 4);
  EXPECT_EQ(ok.dim(), 3);
}

}  // namespace
}  // namespace mfpmp
