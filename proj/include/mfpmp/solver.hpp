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

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfpmp/bridge.hpp"
#include "mfpmp/core.hpp"
#include "mfpmp/dynamics.hpp"
#include "mfpmp/problem.hpp"
#include "mfpmp/regression.hpp"

namespace mfpmp {

/// How grad phi enters the particle system.
enum class Dynamics {
  bridge,      ///< particles carry their own momenta, P is the control signal
  regression,  ///< controls come from the affine fit (constant G only)
};

inline const char* dynamics_name(Dynamics d) { return d == Dynamics::bridge ? "bridge" : "regression"; }

struct SolverConfig {
  double step_size = 0.01;
  long num_steps = 100;
  /// Empty means epsilon = step_size.
  std::optional<double> bridge_epsilon;
  GaugeSpec gauge = NaturalScoreGauge{};
  std::uint64_t rng_seed = 0;
  double sinkhorn_tol = 1e-10;
  int sinkhorn_max_iter = 10000;
  bool symmetrize_regression = true;
  Dynamics dynamics = Dynamics::bridge;
  long snapshot_stride = 10;
  /// Eigenvalue floor applied to Sigma inside the bridge kernel; 0 disables it.
  double sigma_floor = 0.0;
  double equilibrium_threshold = 1e-4;

  double epsilon() const { return bridge_epsilon.value_or(step_size); }

  void validate() const {
    detail::require(step_size > 0.0 && std::isfinite(step_size), "solver: step size must be positive");
    detail::require(num_steps >= 1, "solver: num_steps must be positive");
    detail::require(epsilon() > 0.0, "solver: bridge epsilon must be positive");
    detail::require(sinkhorn_tol > 0.0, "solver: sinkhorn_tol must be positive");
    detail::require(sinkhorn_max_iter >= 1, "solver: sinkhorn_max_iter must be positive");
    detail::require(snapshot_stride >= 1, "solver: snapshot stride must be positive");
    detail::require(num_steps % snapshot_stride == 0, "solver: snapshot stride must divide num_steps");
    detail::require(sigma_floor >= 0.0, "solver: sigma_floor must be non-negative");
  }

  SinkhornOptions sinkhorn() const { return {sinkhorn_tol, sinkhorn_max_iter}; }
};

struct SampleSummary {
  long step = 0;
  double t = 0.0;
  Vector mean;
  Vector stddev;
  double residual = 0.0;
  int sinkhorn_iterations = 0;
  /// exp(-gamma t) mean_i |P_i . X_i|; zero for finite-horizon runs.
  double transversality = 0.0;
};

struct TrajectoryRecord {
  std::vector<long> steps;
  std::vector<double> times;
  std::vector<EnsembleState> snapshots;
  /// Per-sample controls, d_u x M.
  std::vector<Matrix> controls;
  std::vector<SampleSummary> summary;
  AffineGradientModel terminal_model;
  /// Finite-horizon runs: control-law model at every grid time 0..N.
  std::vector<AffineGradientModel> models;
};

struct EquilibriumReport {
  bool converged = false;
  double final_time = 0.0;
  double drift_metric = 0.0;
  AffineGradientModel control_law;
};

struct DiscountedResult {
  TrajectoryRecord record;
  EquilibriumReport report;
};

struct SweepOptions {
  int max_sweeps = 100;
  double relax = 1.0;
  double tolerance = 1e-6;
};

struct SweepResult {
  TrajectoryRecord record;
  bool converged = false;
  int sweeps = 0;
  double last_change = 0.0;
};

namespace detail {

inline SampleSummary summarize(const EnsembleState& e, long step, double residual_value, int iterations) {
  SampleSummary s;
  s.step = step;
  s.t = e.t;
  s.mean = e.X.rowwise().mean();
  const long n = e.size();
  if (n > 1) {
    const Matrix centered = e.X.colwise() - s.mean;
    s.stddev = (centered.rowwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt();
  } else {
    s.stddev = Vector::Zero(e.dim());
  }
  s.residual = residual_value;
  s.sinkhorn_iterations = iterations;
  return s;
}

inline Matrix controls_from_momenta(const ControlProblem& problem, const Matrix& x, const Matrix& p) {
  Matrix u(problem.dim_u(), x.cols());
  for (long i = 0; i < x.cols(); ++i) u.col(i) = eval_control(x.col(i), p.col(i), problem);
  return u;
}

inline double drift_metric(const PhaseDerivative& d) {
  return (d.dX.colwise().norm() + d.dP.colwise().norm()).maxCoeff();
}

/// Non-score part of beta evaluated with momentum proxy `p`.
inline std::optional<Matrix> drift_gauge(const Matrix& x, const Matrix& p, const ControlProblem& problem,
                                         const GaugeSpec& gauge) {
  const bool decouple = std::holds_alternative<DecouplingGauge>(gauge) || std::holds_alternative<CombinedGauge>(gauge);
  if (!decouple) return std::nullopt;
  Matrix beta(x.rows(), x.cols());
  const auto* combined = std::get_if<CombinedGauge>(&gauge);
  for (long i = 0; i < x.cols(); ++i) {
    const Vector xi = x.col(i);
    beta.col(i) = -(problem.control_metric(xi) * p.col(i));
    if (combined && combined->reference_control) {
      beta.col(i) -= problem.control_matrix(xi) * combined->reference_control(xi);
    }
  }
  return beta;
}

/// Builds bridge coefficients, tagging failures with the step index.
inline BridgeCoefficients bridge_at_step(const EnsembleState& e, const ControlProblem& problem,
                                         const SolverConfig& cfg, Vector& warm, long step) {
  try {
    BridgeCoefficients bc = build_bridge(e, cfg.epsilon(), problem.sigma(), cfg.sinkhorn(), cfg.sigma_floor,
                                         warm.size() == e.size() ? &warm : nullptr);
    warm = bc.scalings;
    return bc;
  } catch (const SinkhornError& err) {
    throw SinkhornError("step " + std::to_string(step) + ": " + err.what(), err.iterations(), err.residual());
  }
}

inline void check_finite(const Matrix& m, long step, const char* what) {
  if (!m.allFinite()) {
    throw NumericalError(std::string("non-finite ") + what + " at step " + std::to_string(step), step);
  }
}

}  // namespace detail

/**
 * Forward integration of the discounted mean-field PMP,
 *   dX/dt = grad_p H,   dP/dt = -gamma P + grad_x H,
 * with explicit Euler for cfg.num_steps steps. The fitted affine model at
 * the final state is returned as the control law.
 */
/// Called with (step, state) before every Euler step and at the final step.
using StepObserver = std::function<void(long, const EnsembleState&)>;

inline DiscountedResult solve_discounted_forward(const ControlProblem& problem, const EnsembleState& init,
                                                 const SolverConfig& cfg, const StepObserver& observer = {}) {
  cfg.validate();
  if (!is_discounted(problem.horizon())) {
    throw InvalidArgument("solve_discounted_forward: problem horizon is not discounted");
  }
  init.validate();
  detail::require_dim(init.dim(), problem.dim_x(), "initial ensemble");
  const bool need_bridge = gauge_needs_bridge(cfg.gauge);
  const bool regression = cfg.dynamics == Dynamics::regression;
  const bool drift_gauge =
      std::holds_alternative<DecouplingGauge>(cfg.gauge) || std::holds_alternative<CombinedGauge>(cfg.gauge);
  if (regression) {
    if (!problem.constant_control_matrix()) {
      throw InvalidArgument("regression dynamics require a constant control matrix");
    }
    if (!std::holds_alternative<ZeroGauge>(cfg.gauge) && !std::holds_alternative<NaturalScoreGauge>(cfg.gauge)) {
      throw InvalidArgument("regression dynamics support the zero and natural gauges only");
    }
  }
  const double gamma = problem.discount();
  const double dt = cfg.step_size;

  DiscountedResult out;
  TrajectoryRecord& rec = out.record;
  EnsembleState state = init;
  Vector warm;
  PhaseDerivative deriv;
  for (long k = 0;; ++k) {
    const bool sample = (k % cfg.snapshot_stride == 0) || k == cfg.num_steps;
    std::optional<BridgeCoefficients> bridge;
    if (need_bridge) bridge = detail::bridge_at_step(state, problem, cfg, warm, k);
    std::optional<AffineGradientModel> model;
    if (regression || drift_gauge || sample) model = fit_affine_gradient(state, cfg.symmetrize_regression);

    if (regression) {
      if (bridge) {
        const Matrix score = apply_generator(bridge->generator, state.X);
        deriv = rhs_regression_constG(state, problem, *model, TimeMode::forward_discounted, &score);
      } else {
        deriv = rhs_regression_constG(state, problem, *model, TimeMode::forward_discounted);
      }
    } else {
      GaugeTerms terms;
      if (bridge) terms.bridge = &*bridge;
      std::optional<Matrix> beta_drift;
      if (drift_gauge) {
        beta_drift = detail::drift_gauge(state.X, state.P, problem, cfg.gauge);
        terms.drift = &*beta_drift;
        terms.model = &*model;
      }
      deriv = rhs_mean_field(state, problem, terms, TimeMode::forward_discounted);
    }

    if (observer) observer(k, state);
    if (sample) {
      SampleSummary s = detail::summarize(state, k, residual(state, *model), bridge ? bridge->iterations : 0);
      s.transversality = std::exp(-gamma * state.t) *
                         (state.P.cwiseProduct(state.X)).colwise().sum().cwiseAbs().mean();
      rec.steps.push_back(k);
      rec.times.push_back(state.t);
      rec.snapshots.push_back(state);
      rec.controls.push_back(detail::controls_from_momenta(problem, state.X, state.P));
      rec.summary.push_back(std::move(s));
    }
    if (k == cfg.num_steps) {
      out.report.drift_metric = detail::drift_metric(deriv);
      out.report.final_time = state.t;
      out.report.control_law = *model;
      out.report.converged = out.report.drift_metric < cfg.equilibrium_threshold;
      rec.terminal_model = *model;
      break;
    }
    detail::check_finite(deriv.dX, k, "state derivative");
    detail::check_finite(deriv.dP, k, "momentum derivative");
    state = euler_step(state, deriv, dt, k);
  }
  return out;
}

/**
 * Finite horizon with the decoupling gauge: X follows the uncontrolled flow
 * forward, then P runs backward from P_T = grad f(X_T) along the stored path
 * with
 *   -dP/dt = Db^T P - 1/2 grad_x |R G^T grad phi|_R^2 + grad c,
 * and grad phi = A_t x + c_t refitted at every backward step.
 */
inline TrajectoryRecord solve_finite_horizon_decoupled(const ControlProblem& problem, const EnsembleState& init,
                                                       const SolverConfig& cfg) {
  cfg.validate();
  if (!is_finite_horizon(problem.horizon())) {
    throw InvalidArgument("solve_finite_horizon_decoupled: problem horizon is not finite");
  }
  init.validate();
  detail::require_dim(init.dim(), problem.dim_x(), "initial ensemble");
  const long n_steps = cfg.num_steps;
  const double dt = cfg.step_size;
  const long m = init.size();

  std::vector<Matrix> xs;
  xs.reserve(n_steps + 1);
  xs.push_back(init.X);
  for (long k = 0; k < n_steps; ++k) {
    const Matrix& x = xs.back();
    Matrix next(x.rows(), m);
    for (long i = 0; i < m; ++i) next.col(i) = x.col(i) + dt * problem.drift(x.col(i));
    detail::check_finite(next, k, "state");
    xs.push_back(std::move(next));
  }

  std::vector<Matrix> ps(n_steps + 1);
  std::vector<AffineGradientModel> models(n_steps + 1);
  {
    Matrix pt(init.dim(), m);
    for (long i = 0; i < m; ++i) pt.col(i) = problem.terminal_cost_grad(xs[n_steps].col(i));
    ps[n_steps] = std::move(pt);
  }
  for (long k = n_steps;; --k) {
    const EnsembleState here(init.t + dt * static_cast<double>(k), xs[k], ps[k]);
    models[k] = fit_affine_gradient(here, cfg.symmetrize_regression);
    if (k == 0) break;
    const AffineGradientModel& model = models[k];
    Matrix prev(init.dim(), m);
    for (long i = 0; i < m; ++i) {
      const Vector x = xs[k].col(i);
      const Vector p = ps[k].col(i);
      const Vector y = eval_grad_phi(model, x);
      const Vector half_grad_quad =
          model.A.transpose() * (problem.control_metric(x) * y) + 0.5 * problem.control_quadratic_grad(x, y);
      const Vector rate = problem.drift_jacobian(x).transpose() * p - half_grad_quad + problem.running_cost_grad(x);
      prev.col(i) = p + dt * rate;
    }
    detail::check_finite(prev, k - 1, "momentum");
    ps[k - 1] = std::move(prev);
  }

  TrajectoryRecord rec;
  for (long k = 0; k <= n_steps; k += cfg.snapshot_stride) {
    EnsembleState snap(init.t + dt * static_cast<double>(k), xs[k], ps[k]);
    Matrix u(problem.dim_u(), m);
    const Matrix y = eval_grad_phi(models[k], snap.X);
    for (long i = 0; i < m; ++i) u.col(i) = eval_control(snap.X.col(i), y.col(i), problem);
    rec.summary.push_back(detail::summarize(snap, k, residual(snap, models[k]), 0));
    rec.steps.push_back(k);
    rec.times.push_back(snap.t);
    rec.controls.push_back(std::move(u));
    rec.snapshots.push_back(std::move(snap));
  }
  rec.terminal_model = models.back();
  rec.models = std::move(models);
  return rec;
}

/**
 * Fixed-point iteration for finite-horizon problems under any gauge.
 *
 * Each sweep integrates X forward with the control law of the previous sweep,
 * dX = b - Q (A_t X + c_t) - beta, then integrates P backward from grad f(X_T)
 * along that path and refits A_t, c_t at every grid time. Models are blended
 * with factor `relax`; iteration stops when no model moves by more than
 * `tolerance` (sqrt(|dA|_F^2 + |dc|^2)).
 */
inline SweepResult solve_finite_horizon_sweeps(const ControlProblem& problem, const EnsembleState& init,
                                               const SolverConfig& cfg, const SweepOptions& opts = {}) {
  cfg.validate();
  detail::require(opts.relax > 0.0 && opts.relax <= 1.0, "solve_finite_horizon_sweeps: relax must be in (0, 1]");
  detail::require(opts.max_sweeps >= 1, "solve_finite_horizon_sweeps: max_sweeps must be positive");
  if (!is_finite_horizon(problem.horizon())) {
    throw InvalidArgument("solve_finite_horizon_sweeps: problem horizon is not finite");
  }
  init.validate();
  detail::require_dim(init.dim(), problem.dim_x(), "initial ensemble");
  const long n_steps = cfg.num_steps;
  const double dt = cfg.step_size;
  const long m = init.size();
  const long d = init.dim();
  const bool need_bridge = gauge_needs_bridge(cfg.gauge);

  std::vector<AffineGradientModel> models(n_steps + 1, AffineGradientModel::zero(d));
  std::vector<Matrix> xs(n_steps + 1);
  std::vector<Matrix> ps(n_steps + 1);
  std::vector<int> sinkhorn_iters(n_steps + 1, 0);
  SweepResult result;
  Vector warm;

  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    xs[0] = init.X;
    for (long k = 0; k < n_steps; ++k) {
      const Matrix& x = xs[k];
      const Matrix y = eval_grad_phi(models[k], x);
      Matrix rate(d, m);
      for (long i = 0; i < m; ++i) {
        const Vector xi = x.col(i);
        rate.col(i) = problem.drift(xi) - problem.control_metric(xi) * y.col(i);
      }
      if (need_bridge) {
        const EnsembleState here(0.0, x, Matrix::Zero(d, m));
        const BridgeCoefficients bc = detail::bridge_at_step(here, problem, cfg, warm, k);
        rate -= apply_generator(bc.generator, x);
      }
      if (auto beta = detail::drift_gauge(x, y, problem, cfg.gauge)) rate -= *beta;
      Matrix next = x + dt * rate;
      detail::check_finite(next, k, "state");
      xs[k + 1] = std::move(next);
    }

    std::vector<AffineGradientModel> fresh(n_steps + 1);
    Matrix pt(d, m);
    for (long i = 0; i < m; ++i) pt.col(i) = problem.terminal_cost_grad(xs[n_steps].col(i));
    ps[n_steps] = std::move(pt);
    for (long k = n_steps;; --k) {
      const EnsembleState here(init.t + dt * static_cast<double>(k), xs[k], ps[k]);
      fresh[k] = fit_affine_gradient(here, cfg.symmetrize_regression);
      if (k == 0) break;
      Matrix rate(d, m);
      for (long i = 0; i < m; ++i) {
        const Vector x = xs[k].col(i);
        const Vector p = ps[k].col(i);
        rate.col(i) = problem.drift_jacobian(x).transpose() * p + problem.running_cost_grad(x) -
                      0.5 * problem.control_quadratic_grad(x, p);
      }
      if (need_bridge) {
        const BridgeCoefficients bc = detail::bridge_at_step(here, problem, cfg, warm, k);
        rate += apply_generator(bc.generator, ps[k]);
        sinkhorn_iters[k] = bc.iterations;
      }
      if (auto beta = detail::drift_gauge(xs[k], ps[k], problem, cfg.gauge)) {
        rate += fresh[k].A.transpose() * (*beta);
      }
      Matrix prev = ps[k] + dt * rate;
      detail::check_finite(prev, k - 1, "momentum");
      ps[k - 1] = std::move(prev);
    }

    double change = 0.0;
    for (long k = 0; k <= n_steps; ++k) {
      AffineGradientModel blended = fresh[k];
      if (opts.relax < 1.0) {
        blended.A = opts.relax * fresh[k].A + (1.0 - opts.relax) * models[k].A;
        blended.c = opts.relax * fresh[k].c + (1.0 - opts.relax) * models[k].c;
      }
      change = std::max(change, model_distance(blended, models[k]));
      models[k] = std::move(blended);
    }
    result.sweeps = sweep;
    result.last_change = change;
    if (change < opts.tolerance) {
      result.converged = true;
      break;
    }
  }

  TrajectoryRecord& rec = result.record;
  for (long k = 0; k <= n_steps; k += cfg.snapshot_stride) {
    EnsembleState snap(init.t + dt * static_cast<double>(k), xs[k], ps[k]);
    const Matrix y = eval_grad_phi(models[k], snap.X);
    Matrix u(problem.dim_u(), m);
    for (long i = 0; i < m; ++i) u.col(i) = eval_control(snap.X.col(i), y.col(i), problem);
    rec.summary.push_back(detail::summarize(snap, k, residual(snap, models[k]), sinkhorn_iters[k]));
    rec.steps.push_back(k);
    rec.times.push_back(snap.t);
    rec.controls.push_back(std::move(u));
    rec.snapshots.push_back(std::move(snap));
  }
  rec.terminal_model = models.back();
  rec.models = std::move(models);
  return result;
}

}  // namespace mfpmp
