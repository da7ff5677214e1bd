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

// Right-hand sides of the interacting-particle Hamiltonian systems.
//
// Gauge convention: the state equation is always
//     dX/dt = b(X) - G R G^T P - beta,
// and the gauge enters the momentum equation through the generator term
// L_beta grad phi. With an affine phi the second-order part vanishes and
// L_beta grad phi = A^T beta; with the bridge it is sum_j m_ij P_j.

#include <functional>
#include <optional>
#include <utility>
#include <variant>

#include "mfpmp/bridge.hpp"
#include "mfpmp/core.hpp"
#include "mfpmp/problem.hpp"
#include "mfpmp/regression.hpp"

namespace mfpmp {

using ReferenceControl = std::function<Vector(const Vector&)>;

struct ZeroGauge {};
/// beta = 1/2 Sigma grad log rho, realised by the Schrodinger bridge.
struct NaturalScoreGauge {};
/// beta = -G R G^T P; removes the control from the state equation.
struct DecouplingGauge {};
/// beta = score - G R G^T P - G u_ref(X).
struct CombinedGauge {
  ReferenceControl reference_control;
};

using GaugeSpec = std::variant<ZeroGauge, NaturalScoreGauge, DecouplingGauge, CombinedGauge>;

inline bool gauge_needs_bridge(const GaugeSpec& g) {
  return std::holds_alternative<NaturalScoreGauge>(g) || std::holds_alternative<CombinedGauge>(g);
}

inline const char* gauge_name(const GaugeSpec& g) {
  switch (g.index()) {
    case 0: return "zero";
    case 1: return "natural";
    case 2: return "decoupling";
    default: return "combined";
  }
}

struct PhaseDerivative {
  Matrix dX;
  Matrix dP;
};

enum class TimeMode { backward, forward_discounted };

namespace detail {

inline void check_mode(const ControlProblem& problem, TimeMode mode) {
  if (mode == TimeMode::forward_discounted && !is_discounted(problem.horizon())) {
    throw InvalidArgument("forward-discounted dynamics require a discounted problem");
  }
  if (mode == TimeMode::backward && !is_finite_horizon(problem.horizon())) {
    throw InvalidArgument("backward dynamics require a finite-horizon problem");
  }
}

inline void check_ensemble(const EnsembleState& e, const ControlProblem& problem) {
  require_dim(e.dim(), problem.dim_x(), "ensemble state dimension");
  if (e.P.rows() != e.X.rows() || e.P.cols() != e.X.cols()) {
    throw DimensionError("ensemble X and P shapes differ");
  }
}

/// Converts grad_x H into dP/dt for the selected time mode.
inline void finish_momentum(Matrix& grad_h, const Matrix& p, const ControlProblem& problem, TimeMode mode) {
  if (mode == TimeMode::backward) {
    grad_h = -grad_h;
  } else {
    grad_h -= problem.discount() * p;
  }
}

}  // namespace detail

/// Optional gauge contributions assembled by a solver for one time step.
struct GaugeTerms {
  /// Score part: sum_j m_ij X_j in the state equation, sum_j m_ij P_j in the momentum equation.
  const BridgeCoefficients* bridge = nullptr;
  /// Explicit drift part of beta, one column per particle.
  const Matrix* drift = nullptr;
  /// Affine phi model supplying D^2 phi for the drift part.
  const AffineGradientModel* model = nullptr;
};

/**
 * General mean-field PMP vector field for an arbitrary gauge.
 *
 *   dX_i = b - Q P_i - beta_i
 *   grad_x H_i = Db^T P_i + grad c - 1/2 d/dx (P_i^T Q(x) P_i) + L_beta grad phi
 *
 * and dP = -grad_x H (backward) or -gamma P + grad_x H (forward-discounted).
 */
inline PhaseDerivative rhs_mean_field(const EnsembleState& e, const ControlProblem& problem,
                                      const GaugeTerms& gauge, TimeMode mode) {
  detail::check_mode(problem, mode);
  detail::check_ensemble(e, problem);
  const long n = e.size();
  PhaseDerivative out{Matrix(e.dim(), n), Matrix(e.dim(), n)};
  for (long i = 0; i < n; ++i) {
    const Vector x = e.X.col(i);
    const Vector p = e.P.col(i);
    out.dX.col(i) = problem.drift(x) - problem.control_metric(x) * p;
    out.dP.col(i) = problem.drift_jacobian(x).transpose() * p + problem.running_cost_grad(x) -
                    0.5 * problem.control_quadratic_grad(x, p);
  }
  if (gauge.bridge) {
    detail::require_dim(gauge.bridge->size(), n, "bridge generator size");
    out.dX.noalias() -= apply_generator(gauge.bridge->generator, e.X);
    out.dP.noalias() += apply_generator(gauge.bridge->generator, e.P);
  }
  if (gauge.drift) {
    detail::require(gauge.model != nullptr, "rhs_mean_field: drift gauge requires a phi model");
    detail::require_dim(gauge.drift->cols(), n, "gauge drift columns");
    out.dX -= *gauge.drift;
    out.dP.noalias() += gauge.model->A.transpose() * (*gauge.drift);
  }
  detail::finish_momentum(out.dP, e.P, problem, mode);
  return out;
}

/// Schrodinger-bridge dynamics with the natural score gauge.
inline PhaseDerivative rhs_bridge(const EnsembleState& e, const ControlProblem& problem,
                                  const BridgeCoefficients& bridge, TimeMode mode) {
  GaugeTerms g;
  g.bridge = &bridge;
  return rhs_mean_field(e, problem, g, mode);
}

/**
 * Regression closure for a constant control matrix G, with Q = G R G^T:
 *
 *   dX_i = b - Q (A X_i + c) - s_i
 *   grad_x H_i = Db^T P_i + grad c + A^T Q (A X_i + c - P_i) + A^T s_i
 *
 * where s is an optional score gauge (for instance sum_j m_ij X_j). With no
 * score this is the pure regression gauge beta = Q (A X + c - P).
 */
inline PhaseDerivative rhs_regression_constG(const EnsembleState& e, const ControlProblem& problem,
                                             const AffineGradientModel& model, TimeMode mode,
                                             const Matrix* score = nullptr) {
  if (!problem.constant_control_matrix()) {
    throw InvalidArgument("rhs_regression_constG: problem has a position-dependent control matrix");
  }
  detail::check_mode(problem, mode);
  detail::check_ensemble(e, problem);
  detail::require_dim(model.dim(), e.dim(), "regression model dimension");
  const long n = e.size();
  const Matrix q = problem.control_metric(e.X.col(0));
  const Matrix y = eval_grad_phi(model, e.X);
  PhaseDerivative out{Matrix(e.dim(), n), Matrix(e.dim(), n)};
  for (long i = 0; i < n; ++i) {
    const Vector x = e.X.col(i);
    out.dX.col(i) = problem.drift(x);
    out.dP.col(i) = problem.drift_jacobian(x).transpose() * e.P.col(i) + problem.running_cost_grad(x);
  }
  out.dX.noalias() -= q * y;
  out.dP.noalias() += model.A.transpose() * (q * (y - e.P));
  if (score) {
    detail::require_dim(score->cols(), n, "score gauge columns");
    out.dX -= *score;
    out.dP.noalias() += model.A.transpose() * (*score);
  }
  detail::finish_momentum(out.dP, e.P, problem, mode);
  return out;
}

/// Classical deterministic PMP field: returns (dX/dt, dP/dt) in backward convention.
inline std::pair<Vector, Vector> rhs_classical_pmp(const Vector& x, const Vector& p,
                                                   const ControlProblem& problem) {
  detail::require_dim(x.size(), problem.dim_x(), "rhs_classical_pmp x");
  detail::require_dim(p.size(), problem.dim_x(), "rhs_classical_pmp p");
  Vector dx = problem.drift(x) - problem.control_metric(x) * p;
  Vector dp = -(problem.drift_jacobian(x).transpose() * p + problem.running_cost_grad(x) -
                0.5 * problem.control_quadratic_grad(x, p));
  return {std::move(dx), std::move(dp)};
}

/**
 * Gauge vectors beta_i, one column per particle, in the convention
 * dX = b - G R G^T P - beta. The natural score gauge evaluates to
 * sum_j m_ij X_j, the bridge estimate of 1/2 Sigma grad log rho.
 */
inline Matrix gauge_beta(const EnsembleState& e, const ControlProblem& problem, const GaugeSpec& spec,
                         const BridgeCoefficients* bridge = nullptr) {
  detail::check_ensemble(e, problem);
  const long n = e.size();
  if (gauge_needs_bridge(spec) && bridge == nullptr) {
    throw InvalidArgument(std::string("gauge_beta: gauge '") + gauge_name(spec) +
                          "' requires bridge coefficients");
  }
  Matrix beta = Matrix::Zero(e.dim(), n);
  if (gauge_needs_bridge(spec)) {
    detail::require_dim(bridge->size(), n, "bridge generator size");
    beta = apply_generator(bridge->generator, e.X);
  }
  const bool decouple = std::holds_alternative<DecouplingGauge>(spec) || std::holds_alternative<CombinedGauge>(spec);
  if (decouple) {
    for (long i = 0; i < n; ++i) {
      beta.col(i) -= problem.control_metric(e.X.col(i)) * e.P.col(i);
    }
  }
  if (const auto* combined = std::get_if<CombinedGauge>(&spec)) {
    if (combined->reference_control) {
      for (long i = 0; i < n; ++i) {
        const Vector x = e.X.col(i);
        beta.col(i) -= problem.control_matrix(x) * combined->reference_control(x);
      }
    }
  }
  return beta;
}

/// Explicit Euler step X += dt dX, P += dt dP, t += dt.
inline EnsembleState euler_step(const EnsembleState& e, const PhaseDerivative& d, double dt, long step = -1) {
  detail::require(dt > 0.0, "euler_step: dt must be positive");
  if (d.dX.rows() != e.X.rows() || d.dX.cols() != e.X.cols() || d.dP.rows() != e.P.rows() ||
      d.dP.cols() != e.P.cols()) {
    throw DimensionError("euler_step: derivative shape does not match ensemble");
  }
  EnsembleState next;
  next.t = e.t + dt;
  next.X = e.X + dt * d.dX;
  next.P = e.P + dt * d.dP;
  if (!next.X.allFinite() || !next.P.allFinite()) {
    throw NumericalError("non-finite ensemble state after Euler step " + std::to_string(step), step);
  }
  return next;
}

}  // namespace mfpmp
