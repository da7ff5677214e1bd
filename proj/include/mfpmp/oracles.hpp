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

// Reference solutions for verification. Nothing here calls into the particle
// dynamics or solvers; only the ControlProblem callbacks are shared.

#include <cmath>
#include <cstdint>
#include <vector>

#include "mfpmp/benchmarks.hpp"
#include "mfpmp/core.hpp"
#include "mfpmp/problem.hpp"
#include "mfpmp/random.hpp"
#include "mfpmp/regression.hpp"

namespace mfpmp {

struct RiccatiSolution {
  /// Stationary gain, or S(0) for a finite horizon.
  Matrix S;
  /// Finite horizon only: S(t_k) on the grid t_k = k T / steps.
  std::vector<Matrix> series;
  std::vector<double> times;
  double residual = 0.0;
  int iterations = 0;
};

/// Residual of gamma S = Q + A^T S + S A - S G R G^T S.
inline Matrix riccati_discounted_residual(const LqrProblem& lqr, double gamma, const Matrix& S) {
  const Matrix b = lqr.G * lqr.R * lqr.G.transpose();
  return lqr.Q + lqr.A_dyn.transpose() * S + S * lqr.A_dyn - S * b * S - gamma * S;
}

/**
 * Stabilizing solution of the discounted algebraic Riccati equation, found by
 * a damped fixed-point iteration S <- S + h Res(S) started from S = 0
 * (explicit Euler on the Riccati flow, whose attracting point is the
 * stabilizing solution). Converges when max |Res| <= tol.
 */
inline RiccatiSolution riccati_discounted(const LqrProblem& lqr, double gamma, double tol = 1e-10,
                                          int max_iter = 2000000) {
  detail::require(gamma >= 0.0, "riccati_discounted: gamma must be non-negative");
  const long n = lqr.A_dyn.rows();
  const Matrix b = lqr.G * lqr.R * lqr.G.transpose();
  const Matrix shifted = lqr.A_dyn - 0.5 * gamma * Matrix::Identity(n, n);
  const double a_norm = shifted.norm();
  const double b_norm = b.norm();

  RiccatiSolution sol;
  Matrix s = Matrix::Zero(n, n);
  for (int it = 0; it < max_iter; ++it) {
    const Matrix res = riccati_discounted_residual(lqr, gamma, s);
    sol.residual = res.cwiseAbs().maxCoeff();
    sol.iterations = it;
    if (!std::isfinite(sol.residual)) break;
    if (sol.residual <= tol) {
      sol.S = 0.5 * (s + s.transpose());
      return sol;
    }
    const double h = 0.5 / (1.0 + 2.0 * a_norm + 2.0 * b_norm * s.norm());
    s += h * res;
    s = 0.5 * (s + s.transpose());
  }
  throw ConvergenceError("riccati_discounted: no convergence, residual " + std::to_string(sol.residual));
}

/// Backward Euler-in-reverse-time integration of -dS/dt = Q + A^T S + S A - S G R G^T S, S(T) = F.
inline RiccatiSolution riccati_finite(const LqrProblem& lqr, double T, long steps) {
  detail::require(T > 0.0, "riccati_finite: T must be positive");
  detail::require(steps >= 1, "riccati_finite: steps must be positive");
  const long n = lqr.A_dyn.rows();
  const Matrix b = lqr.G * lqr.R * lqr.G.transpose();
  const double dt = T / static_cast<double>(steps);
  RiccatiSolution sol;
  sol.series.resize(steps + 1);
  sol.times.resize(steps + 1);
  sol.series[steps] = lqr.F.size() == 0 ? Matrix::Zero(n, n) : lqr.F;
  for (long k = steps; k >= 0; --k) sol.times[k] = dt * static_cast<double>(k);
  for (long k = steps; k > 0; --k) {
    const Matrix& s = sol.series[k];
    Matrix prev = s + dt * (lqr.Q + lqr.A_dyn.transpose() * s + s * lqr.A_dyn - s * b * s);
    prev = 0.5 * (prev + prev.transpose());
    if (!prev.allFinite() || prev.norm() > 1e12) {
      throw NumericalError("riccati_finite: blow-up at step " + std::to_string(k - 1), k - 1);
    }
    sol.series[k - 1] = std::move(prev);
  }
  sol.S = sol.series.front();
  return sol;
}

struct ShootingOptions {
  double tol = 1e-10;
  long steps = 2000;
  int max_iter = 50;
};

struct ShootingResult {
  Vector p0;
  std::vector<double> times;
  std::vector<Vector> x;
  std::vector<Vector> p;
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

/// Deterministic PMP field written against the problem callbacks only.
struct PmpField {
  const ControlProblem& problem;

  void operator()(const Vector& x, const Vector& p, Vector& dx, Vector& dp) const {
    const Matrix g = problem.control_matrix(x);
    const Vector control_push = g * (problem.R() * (g.transpose() * p));
    dx = problem.drift(x) - control_push;
    const Vector hx = problem.drift_jacobian(x).transpose() * p + problem.running_cost_grad(x) -
                      0.5 * problem.control_quadratic_grad(x, p);
    dp = -hx;
  }
};

/// Classical RK4 for the state/costate pair on a uniform grid.
inline void rk4_pmp(const ControlProblem& problem, const Vector& x0, const Vector& p0, double T, long steps,
                    std::vector<Vector>* xs, std::vector<Vector>* ps, Vector& xT, Vector& pT) {
  const PmpField field{problem};
  const double h = T / static_cast<double>(steps);
  Vector x = x0, p = p0;
  Vector k1x, k1p, k2x, k2p, k3x, k3p, k4x, k4p;
  if (xs) xs->assign(1, x);
  if (ps) ps->assign(1, p);
  for (long k = 0; k < steps; ++k) {
    field(x, p, k1x, k1p);
    field(x + 0.5 * h * k1x, p + 0.5 * h * k1p, k2x, k2p);
    field(x + 0.5 * h * k2x, p + 0.5 * h * k2p, k3x, k3p);
    field(x + h * k3x, p + h * k3p, k4x, k4p);
    x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    p += (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    if (xs) xs->push_back(x);
    if (ps) ps->push_back(p);
  }
  xT = x;
  pT = p;
}

}  // namespace detail

/**
 * Solves the two-point boundary value problem of the deterministic PMP,
 * X(0) = x0 and P(T) = grad f(X(T)), by damped Newton on P(0) with a
 * central finite-difference Jacobian of the terminal mismatch.
 */
inline ShootingResult shooting_bvp(const ControlProblem& problem, const Vector& x0, double T,
                                   const ShootingOptions& opts = {}) {
  detail::require(T > 0.0, "shooting_bvp: T must be positive");
  detail::require_dim(x0.size(), problem.dim_x(), "shooting_bvp x0");
  detail::require(problem.sigma().cwiseAbs().maxCoeff() == 0.0, "shooting_bvp: requires Sigma = 0");
  const long n = x0.size();

  auto mismatch = [&](const Vector& p0) {
    Vector xT, pT;
    detail::rk4_pmp(problem, x0, p0, T, opts.steps, nullptr, nullptr, xT, pT);
    return Vector(pT - problem.terminal_cost_grad(xT));
  };

  ShootingResult out;
  Vector p0 = Vector::Zero(n);
  Vector f = mismatch(p0);
  double fnorm = f.cwiseAbs().maxCoeff();
  int it = 0;
  for (; it < opts.max_iter && fnorm > opts.tol; ++it) {
    Matrix jac(n, n);
    for (long k = 0; k < n; ++k) {
      const double step = 1e-6 * (1.0 + std::abs(p0(k)));
      Vector hi = p0, lo = p0;
      hi(k) += step;
      lo(k) -= step;
      jac.col(k) = (mismatch(hi) - mismatch(lo)) / (2.0 * step);
    }
    const Vector delta = jac.fullPivLu().solve(-f);
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
      const Vector trial = p0 + lambda * delta;
      const Vector ft = mismatch(trial);
      const double tn = ft.cwiseAbs().maxCoeff();
      if (std::isfinite(tn) && tn < fnorm) {
        p0 = trial;
        f = ft;
        fnorm = tn;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (!(fnorm <= opts.tol)) {
    throw ConvergenceError("shooting_bvp: Newton failed, terminal residual " + std::to_string(fnorm));
  }
  Vector xT, pT;
  detail::rk4_pmp(problem, x0, p0, T, opts.steps, &out.x, &out.p, xT, pT);
  out.p0 = p0;
  out.residual = fnorm;
  out.iterations = it;
  out.times.resize(opts.steps + 1);
  for (long k = 0; k <= opts.steps; ++k) out.times[k] = T * static_cast<double>(k) / static_cast<double>(opts.steps);
  return out;
}

struct MonteCarloOptions {
  Vector x0;
  long paths = 1000;
  std::uint64_t seed = 0;
  double dt = 0.01;
  /// Discounted problems only; non-positive means 10 / gamma.
  double truncation = 0.0;
};

struct CostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/**
 * Estimates the expected cost of the feedback u(x) = -R G(x)^T (A x + c) by
 * Euler-Maruyama simulation of the controlled SDE. Path i draws its noise
 * from the stream (seed, i).
 */
inline CostEstimate monte_carlo_cost(const ControlProblem& problem, const AffineGradientModel& law,
                                     const MonteCarloOptions& opts) {
  detail::require(opts.paths >= 2, "monte_carlo_cost: need at least two paths");
  detail::require(opts.dt > 0.0, "monte_carlo_cost: dt must be positive");
  detail::require_dim(opts.x0.size(), problem.dim_x(), "monte_carlo_cost x0");
  const bool discounted = is_discounted(problem.horizon());
  const double gamma = discounted ? problem.discount() : 0.0;
  const double horizon = discounted ? (opts.truncation > 0.0 ? opts.truncation : 10.0 / gamma) : problem.horizon_T();
  const long steps = std::max<long>(1, std::lround(horizon / opts.dt));
  const double dt = horizon / static_cast<double>(steps);
  const Matrix noise = psd_sqrt(problem.sigma()) * std::sqrt(dt);
  const long d = problem.dim_x();

  double sum = 0.0, sum_sq = 0.0;
  for (long path = 0; path < opts.paths; ++path) {
    GaussianSampler rng = GaussianSampler::for_stream(opts.seed, static_cast<std::uint64_t>(path));
    Vector x = opts.x0;
    double cost = 0.0;
    for (long k = 0; k < steps; ++k) {
      const double t = dt * static_cast<double>(k);
      const Matrix g = problem.control_matrix(x);
      const Vector u = -(problem.R() * (g.transpose() * (law.A * x + law.c)));
      const double weight = discounted ? std::exp(-gamma * t) : 1.0;
      cost += weight * (problem.running_cost(x) + 0.5 * u.dot(problem.solve_R(u))) * dt;
      x += (problem.drift(x) + g * u) * dt + noise * rng.normal_vector(d);
    }
    if (!discounted) cost += problem.terminal_cost(x);
    if (!std::isfinite(cost)) throw NumericalError("monte_carlo_cost: non-finite path cost", path);
    sum += cost;
    sum_sq += cost * cost;
  }
  const double n = static_cast<double>(opts.paths);
  CostEstimate est;
  est.mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0));
  est.std_error = std::sqrt(var / n);
  return est;
}

}  // namespace mfpmp
