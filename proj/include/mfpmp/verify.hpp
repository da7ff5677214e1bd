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

// Oracle checks shared by `mfpmp verify` and the acceptance runner. Each
// check returns a measured value next to its tolerance.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mfpmp/benchmarks.hpp"
#include "mfpmp/bridge.hpp"
#include "mfpmp/dynamics.hpp"
#include "mfpmp/oracles.hpp"
#include "mfpmp/random.hpp"
#include "mfpmp/solver.hpp"

namespace mfpmp {

struct CheckResult {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct SuiteResult {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return !checks.empty();
  }
};

namespace detail {

inline CheckResult make_check(std::string name, double value, double tolerance, std::string detail_text = {}) {
  CheckResult r;
  r.name = std::move(name);
  r.value = value;
  r.tolerance = tolerance;
  r.passed = std::isfinite(value) && value <= tolerance;
  r.detail = std::move(detail_text);
  return r;
}

inline CheckResult failed_check(std::string name, double tolerance, const std::exception& e) {
  CheckResult r;
  r.name = std::move(name);
  r.value = std::numeric_limits<double>::quiet_NaN();
  r.tolerance = tolerance;
  r.detail = e.what();
  return r;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(8);
  os << v;
  return os.str();
}

inline std::string fmt(const Matrix& m) {
  std::ostringstream os;
  os.precision(8);
  os << "[";
  for (long i = 0; i < m.rows(); ++i) {
    if (i) os << "; ";
    for (long j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
  }
  os << "]";
  return os.str();
}

// Central difference with a relative step; returns the Jacobian columns of f.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h_rel = 1e-5) {
  const Vector f0 = f(x);
  Matrix jac(f0.size(), x.size());
  for (long k = 0; k < x.size(); ++k) {
    const double h = h_rel * (1.0 + std::abs(x(k)));
    Vector xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    jac.col(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h_rel = 1e-5) {
  Vector g(x.size());
  for (long k = 0; k < x.size(); ++k) {
    const double h = h_rel * (1.0 + std::abs(x(k)));
    Vector xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    g(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double rel_error(const Matrix& approx, const Matrix& exact) {
  return (approx - exact).norm() / std::max(1.0, exact.norm());
}

}  // namespace detail

/// Terminal fitted A of the forward-discounted regression run against the discounted Riccati gain.
inline CheckResult check_discounted_lqr(const std::string& id, double gamma, long M = 500, std::uint64_t seed = 0,
                                        double dt = 0.01, double horizon_time = 30.0, double eps = 0.05) {
  const std::string name = id + " discounted gamma=" + detail::fmt(gamma) + " vs Riccati";
  const double tol = 0.05;
  try {
    const Benchmark b = make_benchmark(id, {{"gamma", detail::fmt(gamma)}});
    const LqrProblem spec =
        id == "lqr-scalar" ? lqr_scalar_spec(DiscountedInfinite{gamma}) : lqr_2d_spec(DiscountedInfinite{gamma});
    SolverConfig cfg;
    cfg.step_size = dt;
    cfg.num_steps = static_cast<long>(std::lround(horizon_time / dt));
    cfg.snapshot_stride = cfg.num_steps;
    cfg.bridge_epsilon = eps;
    cfg.dynamics = Dynamics::regression;
    cfg.rng_seed = seed;
    const DiscountedResult r = solve_discounted_forward(b.problem, b.sample(M, seed), cfg);
    const RiccatiSolution ric = riccati_discounted(spec, gamma);
    const Matrix& a = r.report.control_law.A;
    const double err = (a - ric.S).norm() / ric.S.norm();
    return detail::make_check(name, err, tol, "A=" + detail::fmt(a) + " S=" + detail::fmt(ric.S));
  } catch (const std::exception& e) {
    return detail::failed_check(name, tol, e);
  }
}

/// Decoupled finite-horizon solve of the scalar LQR (T = 1) against s(0) = tanh(1).
inline CheckResult check_finite_lqr(long M = 200, std::uint64_t seed = 0, double dt = 1e-3) {
  const std::string name = "lqr-scalar finite T=1 decoupled A_0 vs tanh(1)";
  const double tol = 0.05;
  try {
    const Benchmark b = make_benchmark("lqr-scalar", {{"horizon", "finite"}, {"T", "1"}});
    SolverConfig cfg;
    cfg.step_size = dt;
    cfg.num_steps = static_cast<long>(std::lround(1.0 / dt));
    cfg.snapshot_stride = cfg.num_steps;
    cfg.gauge = DecouplingGauge{};
    const TrajectoryRecord rec = solve_finite_horizon_decoupled(b.problem, b.sample(M, seed), cfg);
    const RiccatiSolution ric = riccati_finite(lqr_scalar_spec(FiniteHorizon{1.0}), 1.0, cfg.num_steps);
    const double a0 = rec.models.front().A(0, 0);
    const double exact = std::tanh(1.0);
    return detail::make_check(name, std::abs(a0 - exact) / exact, tol,
                              "A_0=" + detail::fmt(a0) + " riccati_finite S(0)=" + detail::fmt(ric.S(0, 0)));
  } catch (const std::exception& e) {
    return detail::failed_check(name, tol, e);
  }
}

/// A_0 from the decoupled solver against the zero-gauge sweep iteration.
inline CheckResult check_gauge_invariance(long M = 200, std::uint64_t seed = 0, double dt = 1e-3) {
  const std::string name = "lqr-scalar finite decoupled vs zero gauge A_0";
  const double tol = 0.01;
  try {
    const Benchmark b = make_benchmark("lqr-scalar", {{"horizon", "finite"}, {"T", "1"}});
    const EnsembleState init = b.sample(M, seed);
    SolverConfig cfg;
    cfg.step_size = dt;
    cfg.num_steps = static_cast<long>(std::lround(1.0 / dt));
    cfg.snapshot_stride = cfg.num_steps;
    cfg.gauge = DecouplingGauge{};
    const TrajectoryRecord dec = solve_finite_horizon_decoupled(b.problem, init, cfg);
    cfg.gauge = ZeroGauge{};
    const SweepResult sw = solve_finite_horizon_sweeps(b.problem, init, cfg);
    if (!sw.converged) {
      return detail::make_check(name, std::numeric_limits<double>::infinity(), tol,
                                "sweeps did not converge, last change " + detail::fmt(sw.last_change));
    }
    const double a_dec = dec.models.front().A(0, 0);
    const double a_zero = sw.record.models.front().A(0, 0);
    return detail::make_check(name, std::abs(a_dec - a_zero) / std::abs(a_dec), tol,
                              "decoupled=" + detail::fmt(a_dec) + " zero=" + detail::fmt(a_zero) +
                                  " sweeps=" + std::to_string(sw.sweeps));
  } catch (const std::exception& e) {
    return detail::failed_check(name, tol, e);
  }
}

/// Single deterministic particle, zero gauge, against the shooting solution.
inline CheckResult check_classical_reduction(const std::string& id, const Vector& x0, double T, double tol,
                                             double dt = 1e-4) {
  const std::string name = id + " M=1 zero gauge vs shooting (T=" + detail::fmt(T) + ")";
  try {
    const Benchmark b = make_benchmark(id, {{"horizon", "finite"}, {"T", detail::fmt(T)}, {"sigma", "0"}});
    SolverConfig cfg;
    cfg.step_size = dt;
    cfg.num_steps = static_cast<long>(std::lround(T / dt));
    cfg.snapshot_stride = 1;
    cfg.gauge = ZeroGauge{};
    SweepOptions so;
    so.tolerance = 1e-10;
    so.max_sweeps = 200;
    const EnsembleState init(0.0, Matrix(x0), Matrix::Zero(x0.size(), 1));
    const SweepResult sw = solve_finite_horizon_sweeps(b.problem, init, cfg, so);
    ShootingOptions opts;
    opts.steps = cfg.num_steps;
    const ShootingResult sh = shooting_bvp(b.problem, x0, T, opts);
    double err = 0.0;
    for (std::size_t k = 0; k < sh.x.size(); ++k) {
      err = std::max(err, (sh.x[k] - sw.record.snapshots[k].X.col(0)).cwiseAbs().maxCoeff());
    }
    return detail::make_check(name, err, tol,
                              "sweeps=" + std::to_string(sw.sweeps) + " shooting residual=" + detail::fmt(sh.residual));
  } catch (const std::exception& e) {
    return detail::failed_check(name, tol, e);
  }
}

/// Row/column sums, symmetry and sign of the bridge generator on random clouds,
/// plus the two-particle closed form. The value is the worst violation ratio.
inline CheckResult check_sinkhorn_properties(int clouds = 50, std::uint64_t seed = 0) {
  const std::string name = "Sinkhorn generator properties on " + std::to_string(clouds) + " clouds";
  try {
    GaussianSampler rng(seed);
    const long sizes[] = {2, 10, 100};
    double worst = 0.0;
    std::string where;
    for (int c = 0; c < clouds; ++c) {
      const long m = sizes[c % 3];
      const long d = 1 + static_cast<long>(3.0 * rng.uniform());
      const double spread = 0.1 + 1.9 * rng.uniform();
      const double eps = 0.05 + 0.95 * rng.uniform();
      Matrix x(d, m);
      for (long i = 0; i < m; ++i) x.col(i) = spread * rng.normal_vector(d);
      const EnsembleState e(0.0, x, Matrix::Zero(d, m));
      const BridgeCoefficients bc = build_bridge(e, eps, Matrix::Identity(d, d));
      const Matrix& g = bc.generator;
      const double bound = 1e-10 / eps;
      const double rows = g.rowwise().sum().cwiseAbs().maxCoeff() / bound;
      const double cols = g.colwise().sum().cwiseAbs().maxCoeff() / bound;
      const double asym = (g - g.transpose()).cwiseAbs().maxCoeff() > 0.0 ? 2.0 : 0.0;
      double neg = 0.0;
      for (long i = 0; i < m; ++i) {
        for (long j = 0; j < m; ++j) {
          if (i != j && g(i, j) < 0.0) neg = 2.0;
        }
      }
      const double v = std::max({rows, cols, asym, neg});
      if (v > worst) {
        worst = v;
        where = "cloud " + std::to_string(c) + " (M=" + std::to_string(m) + ")";
      }
    }
    // two particles: m_12 = q / ((1 + q) eps) with q = exp(-|dx|^2 / (2 eps)),
    // solved tightly since the default tolerance alone bounds m only to 1e-10 / eps
    SinkhornOptions tight;
    tight.tol = 1e-14;
    for (int c = 0; c < clouds; ++c) {
      const double eps = 0.05 + 0.95 * rng.uniform();
      const Vector a = rng.normal_vector(2), b = rng.normal_vector(2);
      Matrix x(2, 2);
      x << a, b;
      const EnsembleState e(0.0, x, Matrix::Zero(2, 2));
      const BridgeCoefficients bc = build_bridge(e, eps, Matrix::Identity(2, 2), tight);
      const double q = std::exp(-(a - b).squaredNorm() / (2.0 * eps));
      const double off = q / ((1.0 + q) * eps);
      Matrix expect(2, 2);
      expect << -off, off, off, -off;
      const double v = (bc.generator - expect).cwiseAbs().maxCoeff() / 1e-12;
      if (v > worst) {
        worst = v;
        where = "two-particle case " + std::to_string(c);
      }
    }
    return detail::make_check(name, worst, 1.0, worst > 0.0 ? "worst at " + where : "");
  } catch (const std::exception& e) {
    return detail::failed_check(name, 1.0, e);
  }
}

/// Slope of the natural-gauge beta regressed on the analytic score -1/2 C^{-1} X.
inline CheckResult check_score_consistency(long M = 5000, long d = 2, double eps = 0.1, std::uint64_t seed = 0) {
  const std::string name = "bridge score slope (M=" + std::to_string(M) + ", d=" + std::to_string(d) + ")";
  const double tol = 0.15;
  try {
    LqrProblem spec = lqr_2d_spec(DiscountedInfinite{1.0}, 1.0);
    if (d != 2) {
      spec.A_dyn = Matrix::Zero(d, d);
      spec.G = spec.Q = spec.R = spec.sigma = Matrix::Identity(d, d);
      spec.F = Matrix::Zero(d, d);
    }
    const ControlProblem problem = lqr_make(spec);
    const EnsembleState e = gaussian_ensemble(Vector::Zero(d), 1.0, M, seed);
    const BridgeCoefficients bc = build_bridge(e, eps, Matrix::Identity(d, d));
    const Matrix beta = gauge_beta(e, problem, NaturalScoreGauge{}, &bc);
    const Matrix centred = e.X.colwise() - e.X.rowwise().mean();
    const Matrix cov = centred * centred.transpose() / static_cast<double>(M - 1);
    const Matrix score = -0.5 * cov.ldlt().solve(e.X);
    const double slope = beta.cwiseProduct(score).sum() / score.squaredNorm();
    return detail::make_check(name, std::abs(slope - 1.0), tol, "slope=" + detail::fmt(slope));
  } catch (const std::exception& e) {
    return detail::failed_check(name, tol, e);
  }
}

/// Finite-difference validation of Db, grad c, grad f and the control quadratic gradient.
inline CheckResult check_gradients(const std::string& id, int points = 100, std::uint64_t seed = 0,
                                   double tol = 1e-5) {
  const std::string name = id + " derivative callbacks vs finite differences";
  try {
    ParameterOverrides o;
    if (id == "lqr-scalar" || id == "lqr-2d") o["terminal"] = "0.7";
    const Benchmark b = make_benchmark(id, o);
    const ControlProblem& pr = b.problem;
    GaussianSampler rng(seed);
    double worst = 0.0;
    std::string where;
    const long d = pr.dim_x();
    for (int k = 0; k < points; ++k) {
      Vector x = 2.0 * rng.normal_vector(d);
      // keep away from the kink of min(x, 0)^2
      if (id == "lorenz63" && std::abs(x(0)) < 1e-3) x(0) += 0.1;
      const Vector p = rng.normal_vector(d);
      const auto track = [&](double err, const char* what) {
        if (err > worst) {
          worst = err;
          where = std::string(what) + " at point " + std::to_string(k);
        }
      };
      track(detail::rel_error(detail::fd_jacobian([&](const Vector& z) { return pr.drift(z); }, x),
                              pr.drift_jacobian(x)),
            "Db");
      track(detail::rel_error(detail::fd_gradient([&](const Vector& z) { return pr.running_cost(z); }, x),
                              pr.running_cost_grad(x)),
            "grad c");
      track(detail::rel_error(detail::fd_gradient([&](const Vector& z) { return pr.terminal_cost(z); }, x),
                              pr.terminal_cost_grad(x)),
            "grad f");
      track(detail::rel_error(
                detail::fd_gradient([&](const Vector& z) { return p.dot(pr.control_metric(z) * p); }, x),
                pr.control_quadratic_grad(x, p)),
            "control quadratic grad");
    }
    return detail::make_check(name, worst, tol, "worst " + where);
  } catch (const std::exception& e) {
    return detail::failed_check(name, tol, e);
  }
}

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {"lqr-scalar", "lqr-2d", "classical", "sinkhorn",
                                                 "score",      "gradients", "all"};
  return names;
}

/// Runs a named suite. Unknown names raise InvalidArgument.
inline SuiteResult run_verify_suite(const std::string& suite, std::uint64_t seed = 0) {
  SuiteResult out;
  out.suite = suite;
  const bool all = suite == "all";
  bool known = all;
  if (all || suite == "lqr-scalar") {
    known = true;
    out.checks.push_back(check_discounted_lqr("lqr-scalar", 0.2, 500, seed));
    out.checks.push_back(check_discounted_lqr("lqr-scalar", 1.0, 500, seed));
    out.checks.push_back(check_finite_lqr(200, seed));
    out.checks.push_back(check_gauge_invariance(200, seed));
  }
  if (all || suite == "lqr-2d") {
    known = true;
    out.checks.push_back(check_discounted_lqr("lqr-2d", 0.2, 500, seed));
    out.checks.push_back(check_discounted_lqr("lqr-2d", 1.0, 500, seed));
  }
  if (all || suite == "classical") {
    known = true;
    out.checks.push_back(check_classical_reduction("lqr-scalar", Vector::Constant(1, 1.0), 1.0, 1e-4));
    out.checks.push_back(check_classical_reduction("pendulum", Eigen::Vector2d(1.0, -0.5), 0.2, 1e-3));
  }
  if (all || suite == "sinkhorn") {
    known = true;
    out.checks.push_back(check_sinkhorn_properties(50, seed));
  }
  if (all || suite == "score") {
    known = true;
    out.checks.push_back(check_score_consistency(5000, 2, 0.1, seed));
  }
  if (all || suite == "gradients") {
    known = true;
    for (const auto& [id, desc] : benchmark_catalog()) out.checks.push_back(check_gradients(id, 100, seed));
  }
  if (!known) throw InvalidArgument("unknown verify suite '" + suite + "'");
  return out;
}

}  // namespace mfpmp
