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

#include "test_support.hpp"

namespace mfpmp {
namespace {

using testing::linear_problem;
using testing::scalar;
using testing::vec;

SolverConfig config(double dt, long steps) {
  SolverConfig c;
  c.step_size = dt;
  c.num_steps = steps;
  c.snapshot_stride = steps % 10 == 0 ? 10 : 1;
  return c;
}

TEST(SolverConfig, Validation) {
  EXPECT_NO_THROW(config(0.01, 10).validate());
  EXPECT_THROW(config(0.0, 10).validate(), InvalidArgument);
  EXPECT_THROW(config(0.01, 0).validate(), InvalidArgument);
  SolverConfig c = config(0.01, 10);
  c.snapshot_stride = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.snapshot_stride = 3;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = config(0.01, 10);
  c.bridge_epsilon = -1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_DOUBLE_EQ(config(0.02, 1).epsilon(), 0.02);
  c = config(0.02, 1);
  c.bridge_epsilon = 0.3;
  EXPECT_DOUBLE_EQ(c.epsilon(), 0.3);
}

TEST(DiscountedForward, ScalarLqrMatchesRiccati) {
  const CheckResult r = check_discounted_lqr("lqr-scalar", 1.0, 200, 0, 0.01, 15.0);
  EXPECT_TRUE(r.passed) << r.detail;
  EXPECT_LT(r.value, 0.01);
}

TEST(DiscountedForward, LargeDiscountIsQuasiStatic) {
  const Benchmark b = make_benchmark("lqr-scalar", {{"gamma", "100"}});
  SolverConfig c = config(1e-3, 1000);
  c.bridge_epsilon = 0.05;
  const DiscountedResult r = solve_discounted_forward(b.problem, b.sample(100, 0), c);
  const double exact = riccati_discounted(lqr_scalar_spec(DiscountedInfinite{100.0}), 100.0).S(0, 0);
  EXPECT_NEAR(exact, 0.01, 1e-4);
  EXPECT_NEAR(r.report.control_law.A(0, 0), exact, 0.01 * exact);
}

TEST(DiscountedForward, RestingParticleIsAnEquilibrium) {
  const ControlProblem pr = linear_problem(scalar(0), scalar(1), scalar(1), scalar(1), DiscountedInfinite{1.0},
                                           scalar(0.5));
  const EnsembleState init(0.0, Matrix::Zero(1, 1), Matrix::Zero(1, 1));
  const DiscountedResult r = solve_discounted_forward(pr, init, config(0.01, 100));
  EXPECT_TRUE(r.report.converged);
  EXPECT_EQ(r.report.drift_metric, 0.0);
  EXPECT_DOUBLE_EQ(r.report.final_time, 1.0);
}

TEST(DiscountedForward, RecordLayout) {
  const Benchmark b = make_benchmark("lqr-2d");
  SolverConfig c = config(0.01, 30);
  c.snapshot_stride = 10;
  const DiscountedResult r = solve_discounted_forward(b.problem, b.sample(8, 1), c);
  const std::vector<long> expected{0, 10, 20, 30};
  EXPECT_EQ(r.record.steps, expected);
  ASSERT_EQ(r.record.snapshots.size(), 4u);
  EXPECT_NEAR(r.record.times.back(), 0.3, 1e-12);
  EXPECT_EQ(r.record.controls.front().rows(), 2);
  EXPECT_EQ(r.record.controls.front().cols(), 8);
  EXPECT_EQ(r.record.summary.size(), 4u);
}

TEST(DiscountedForward, Deterministic) {
  const Benchmark b = make_benchmark("pendulum");
  const SolverConfig c = config(0.025, 40);
  const DiscountedResult r1 = solve_discounted_forward(b.problem, b.sample(30, 5), c);
  const DiscountedResult r2 = solve_discounted_forward(b.problem, b.sample(30, 5), c);
  ASSERT_EQ(r1.record.snapshots.size(), r2.record.snapshots.size());
  for (std::size_t k = 0; k < r1.record.snapshots.size(); ++k) {
    EXPECT_EQ(r1.record.snapshots[k].X, r2.record.snapshots[k].X);
    EXPECT_EQ(r1.record.snapshots[k].P, r2.record.snapshots[k].P);
  }
}

TEST(DiscountedForward, ObserverSeesEveryStep) {
  const Benchmark b = make_benchmark("lqr-scalar");
  std::vector<long> seen;
  double last_t = -1.0;
  solve_discounted_forward(b.problem, b.sample(5, 0), config(0.1, 7), [&](long k, const EnsembleState& s) {
    seen.push_back(k);
    last_t = s.t;
  });
  ASSERT_EQ(seen.size(), 8u);
  for (long k = 0; k < 8; ++k) EXPECT_EQ(seen[static_cast<std::size_t>(k)], k);
  EXPECT_NEAR(last_t, 0.7, 1e-12);
}

TEST(DiscountedForward, BlowUpRaisesNumericalError) {
  const Benchmark b = make_benchmark("lorenz63");
  SolverConfig c = config(0.05, 2000);
  c.bridge_epsilon = 0.1;
  try {
    solve_discounted_forward(b.problem, b.sample(20, 0), c);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_GT(e.step(), 0);
    EXPECT_LT(e.step(), 2000);
  }
}

TEST(DiscountedForward, RejectsFiniteHorizonAndBadDynamics) {
  const Benchmark fin = make_benchmark("lqr-scalar", {{"horizon", "finite"}});
  EXPECT_THROW(solve_discounted_forward(fin.problem, fin.sample(4, 0), config(0.01, 5)), InvalidArgument);
  const Benchmark pend = make_benchmark("pendulum");
  SolverConfig c = config(0.01, 5);
  c.dynamics = Dynamics::regression;
  EXPECT_THROW(solve_discounted_forward(pend.problem, pend.sample(4, 0), c), InvalidArgument);
  const Benchmark lqr = make_benchmark("lqr-scalar");
  c.gauge = DecouplingGauge{};
  EXPECT_THROW(solve_discounted_forward(lqr.problem, lqr.sample(4, 0), c), InvalidArgument);
}

TEST(FiniteDecoupled, ZeroCostGivesZeroMomenta) {
  const ControlProblem pr = linear_problem(scalar(0.3), scalar(1), scalar(1), scalar(0), FiniteHorizon{1.0});
  const EnsembleState init = gaussian_ensemble(vec({0.0}), 1.0, 20, 1);
  const TrajectoryRecord rec = solve_finite_horizon_decoupled(pr, init, config(0.01, 100));
  for (const auto& s : rec.snapshots) EXPECT_TRUE(s.P.isZero(0.0));
  for (const auto& m : rec.models) EXPECT_LT(m.A.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FiniteDecoupled, ShortHorizonReturnsTerminalWeight) {
  LqrProblem spec = lqr_scalar_spec(FiniteHorizon{1e-6}, 0.5, 1.0);
  const ControlProblem pr = lqr_make(spec);
  const TrajectoryRecord rec =
      solve_finite_horizon_decoupled(pr, gaussian_ensemble(vec({0.0}), 1.0, 20, 2), config(1e-6, 1));
  EXPECT_NEAR(rec.models.front().A(0, 0), 1.0, 1e-6);
}

TEST(FiniteDecoupled, ScalarLqrMatchesTanh) {
  const CheckResult r = check_finite_lqr(200, 0, 1e-3);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(FiniteDecoupled, RejectsDiscountedProblem) {
  const Benchmark b = make_benchmark("lqr-scalar");
  EXPECT_THROW(solve_finite_horizon_decoupled(b.problem, b.sample(4, 0), config(0.01, 5)), InvalidArgument);
}

TEST(FiniteSweeps, AgreeWithDecoupledSolver) {
  const Benchmark b = make_benchmark("lqr-scalar", {{"horizon", "finite"}});
  const EnsembleState init = b.sample(50, 3);
  SolverConfig c = config(1e-3, 1000);
  c.gauge = ZeroGauge{};
  const SweepResult sw = solve_finite_horizon_sweeps(b.problem, init, c);
  const TrajectoryRecord dec = solve_finite_horizon_decoupled(b.problem, init, c);
  ASSERT_TRUE(sw.converged);
  const double a_sw = sw.record.models.front().A(0, 0);
  const double a_dec = dec.models.front().A(0, 0);
  EXPECT_NEAR(a_sw, a_dec, 1e-2 * a_dec);
  EXPECT_NEAR(a_sw, std::tanh(1.0), 2e-2);
}

TEST(FiniteSweeps, ZeroCostConvergesImmediately) {
  const ControlProblem pr = linear_problem(scalar(0.3), scalar(1), scalar(1), scalar(0), FiniteHorizon{1.0});
  SolverConfig c = config(0.01, 100);
  c.gauge = ZeroGauge{};
  const SweepResult sw = solve_finite_horizon_sweeps(pr, gaussian_ensemble(vec({0.0}), 1.0, 10, 4), c);
  EXPECT_TRUE(sw.converged);
  EXPECT_EQ(sw.sweeps, 1);
  EXPECT_EQ(sw.last_change, 0.0);
}

TEST(FiniteSweeps, RejectsBadOptions) {
  const Benchmark b = make_benchmark("lqr-scalar", {{"horizon", "finite"}});
  SweepOptions o;
  o.relax = 0.0;
  EXPECT_THROW(solve_finite_horizon_sweeps(b.problem, b.sample(4, 0), config(0.01, 5), o), InvalidArgument);
  o.relax = 1.5;
  EXPECT_THROW(solve_finite_horizon_sweeps(b.problem, b.sample(4, 0), config(0.01, 5), o), InvalidArgument);
  o = {};
  o.max_sweeps = 0;
  EXPECT_THROW(solve_finite_horizon_sweeps(b.problem, b.sample(4, 0), config(0.01, 5), o), InvalidArgument);
  const Benchmark disc = make_benchmark("lqr-scalar");
  EXPECT_THROW(solve_finite_horizon_sweeps(disc.problem, disc.sample(4, 0), config(0.01, 5)), InvalidArgument);
}

TEST(FiniteSweeps, GaugeInvariance) {
  const CheckResult r = check_gauge_invariance(200, 0, 1e-3);
  EXPECT_TRUE(r.passed) << r.detail;
}

}  // namespace
}  // namespace mfpmp
