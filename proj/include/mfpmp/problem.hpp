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
#include <functional>
#include <variant>

#include "mfpmp/core.hpp"

namespace mfpmp {

struct FiniteHorizon {
  double T = 1.0;
};

struct DiscountedInfinite {
  double gamma = 1.0;
};

using HorizonSpec = std::variant<FiniteHorizon, DiscountedInfinite>;

inline bool is_finite_horizon(const HorizonSpec& h) { return std::holds_alternative<FiniteHorizon>(h); }
inline bool is_discounted(const HorizonSpec& h) { return std::holds_alternative<DiscountedInfinite>(h); }

/**
 * Everything needed to assemble a ControlProblem.
 *
 * The controlled dynamics are dX = (b(X) + G(X) U) dt + Sigma^{1/2} dB with
 * running cost c(X) + 1/2 U^T R^{-1} U, terminal cost f (finite horizon) or
 * discount factor gamma (infinite horizon).
 *
 * `control_quadratic_grad(x, p)` must return the x-gradient of
 * p^T G(x) R G(x)^T p with p held fixed. Problems with a constant G set
 * `constant_control_matrix` and may leave the callback empty.
 */
struct ProblemDefinition {
  int dim_x = 0;
  int dim_u = 0;
  std::function<Vector(const Vector&)> drift;
  std::function<Matrix(const Vector&)> drift_jacobian;
  std::function<Matrix(const Vector&)> control_matrix;
  std::function<Vector(const Vector&, const Vector&)> control_quadratic_grad;
  std::function<double(const Vector&)> running_cost;
  std::function<Vector(const Vector&)> running_cost_grad;
  std::function<double(const Vector&)> terminal_cost;
  std::function<Vector(const Vector&)> terminal_cost_grad;
  Matrix weight_R;
  Matrix diffusion;
  HorizonSpec horizon = DiscountedInfinite{};
  bool constant_control_matrix = false;
};

/// Immutable optimal-control problem; safe to share across threads.
class ControlProblem {
 public:
  explicit ControlProblem(ProblemDefinition def) : def_(std::move(def)) {
    detail::require(def_.dim_x > 0, "ControlProblem: dim_x must be positive");
    detail::require(def_.dim_u > 0, "ControlProblem: dim_u must be positive");
    detail::require(static_cast<bool>(def_.drift) && static_cast<bool>(def_.drift_jacobian),
                    "ControlProblem: drift and drift_jacobian are required");
    detail::require(static_cast<bool>(def_.control_matrix), "ControlProblem: control_matrix is required");
    detail::require(static_cast<bool>(def_.running_cost) && static_cast<bool>(def_.running_cost_grad),
                    "ControlProblem: running cost and gradient are required");
    detail::require(def_.constant_control_matrix || static_cast<bool>(def_.control_quadratic_grad),
                    "ControlProblem: control_quadratic_grad is required for position-dependent G");
    detail::require_dim(def_.weight_R.rows(), def_.dim_u, "ControlProblem weight_R rows");
    detail::require_dim(def_.weight_R.cols(), def_.dim_u, "ControlProblem weight_R cols");
    if (def_.diffusion.size() == 0) def_.diffusion = Matrix::Zero(def_.dim_x, def_.dim_x);
    detail::require_dim(def_.diffusion.rows(), def_.dim_x, "ControlProblem diffusion rows");
    detail::require_dim(def_.diffusion.cols(), def_.dim_x, "ControlProblem diffusion cols");

    detail::require(detail::is_symmetric(def_.weight_R), "ControlProblem: R must be symmetric");
    r_chol_.compute(def_.weight_R);
    detail::require(r_chol_.info() == Eigen::Success, "ControlProblem: R must be positive definite");
    detail::require(detail::is_psd(def_.diffusion), "ControlProblem: Sigma must be symmetric PSD");

    std::visit(
        [](const auto& h) {
          using H = std::decay_t<decltype(h)>;
          if constexpr (std::is_same_v<H, FiniteHorizon>) {
            detail::require(h.T > 0.0, "ControlProblem: horizon T must be positive");
          } else {
            detail::require(h.gamma > 0.0, "ControlProblem: discount gamma must be positive");
          }
        },
        def_.horizon);
    if (is_finite_horizon(def_.horizon)) {
      if (!def_.terminal_cost) def_.terminal_cost = [](const Vector&) { return 0.0; };
      if (!def_.terminal_cost_grad) {
        const int n = def_.dim_x;
        def_.terminal_cost_grad = [n](const Vector&) -> Vector { return Vector::Zero(n); };
      }
    }
  }

  int dim_x() const noexcept { return def_.dim_x; }
  int dim_u() const noexcept { return def_.dim_u; }
  const Matrix& R() const noexcept { return def_.weight_R; }
  const Matrix& sigma() const noexcept { return def_.diffusion; }
  const HorizonSpec& horizon() const noexcept { return def_.horizon; }
  bool constant_control_matrix() const noexcept { return def_.constant_control_matrix; }
  const ProblemDefinition& definition() const noexcept { return def_; }

  double horizon_T() const {
    if (!is_finite_horizon(def_.horizon)) throw InvalidArgument("problem has no finite horizon");
    return std::get<FiniteHorizon>(def_.horizon).T;
  }
  double discount() const {
    if (!is_discounted(def_.horizon)) throw InvalidArgument("problem is not discounted");
    return std::get<DiscountedInfinite>(def_.horizon).gamma;
  }

  Vector drift(const Vector& x) const { return def_.drift(x); }
  Matrix drift_jacobian(const Vector& x) const { return def_.drift_jacobian(x); }
  Matrix control_matrix(const Vector& x) const { return def_.control_matrix(x); }
  double running_cost(const Vector& x) const { return def_.running_cost(x); }
  Vector running_cost_grad(const Vector& x) const { return def_.running_cost_grad(x); }

  double terminal_cost(const Vector& x) const {
    return def_.terminal_cost ? def_.terminal_cost(x) : 0.0;
  }
  Vector terminal_cost_grad(const Vector& x) const {
    return def_.terminal_cost_grad ? def_.terminal_cost_grad(x) : Vector::Zero(def_.dim_x);
  }

  /// x-gradient of p^T G(x) R G(x)^T p at fixed p.
  Vector control_quadratic_grad(const Vector& x, const Vector& p) const {
    if (def_.constant_control_matrix && !def_.control_quadratic_grad) return Vector::Zero(def_.dim_x);
    return def_.control_quadratic_grad(x, p);
  }

  /// G(x) R G(x)^T
  Matrix control_metric(const Vector& x) const {
    const Matrix g = control_matrix(x);
    return g * def_.weight_R * g.transpose();
  }

  Vector solve_R(const Vector& u) const { return r_chol_.solve(u); }

 private:
  ProblemDefinition def_;
  Eigen::LLT<Matrix> r_chol_;
};

/// Ensemble of M paired particles (X^(i), P^(i)) stored column-wise.
struct EnsembleState {
  double t = 0.0;
  Matrix X;
  Matrix P;

  EnsembleState() = default;
  EnsembleState(double time, Matrix positions, Matrix momenta)
      : t(time), X(std::move(positions)), P(std::move(momenta)) {
    validate();
  }

  long size() const noexcept { return X.cols(); }
  long dim() const noexcept { return X.rows(); }

  void validate() const {
    if (X.rows() != P.rows() || X.cols() != P.cols()) {
      throw DimensionError("EnsembleState: X and P shapes differ");
    }
    if (X.cols() < 1) throw InvalidArgument("EnsembleState: ensemble size must be at least 1");
    if (!all_finite()) throw NumericalError("EnsembleState: non-finite entry", -1);
  }

  bool all_finite() const { return X.allFinite() && P.allFinite() && std::isfinite(t); }
};

/// Closed-loop control u = -R G(x)^T p.
inline Vector eval_control(const Vector& x, const Vector& p, const ControlProblem& problem) {
  detail::require_dim(x.size(), problem.dim_x(), "eval_control x");
  detail::require_dim(p.size(), problem.dim_x(), "eval_control p");
  return -(problem.R() * (problem.control_matrix(x).transpose() * p));
}

/// ||u||_R^2 = u^T R^{-1} u.
inline double weighted_norm_sq_R(const Vector& u, const ControlProblem& problem) {
  detail::require_dim(u.size(), problem.dim_u(), "weighted_norm_sq_R");
  return u.dot(problem.solve_R(u));
}

/// ||R G(x)^T p||_R^2, which equals p^T G R G^T p.
inline double control_quadratic(const Vector& x, const Vector& p, const ControlProblem& problem) {
  detail::require_dim(x.size(), problem.dim_x(), "control_quadratic x");
  detail::require_dim(p.size(), problem.dim_x(), "control_quadratic p");
  const Vector gp = problem.control_matrix(x).transpose() * p;
  return gp.dot(problem.R() * gp);
}

/**
 * Mean-field Hamiltonian density
 *   H = -1/2 ||R G^T p||_R^2 + p.b + c + beta.(grad_phi - p) + 1/2 Sigma:D^2 phi.
 * The caller provides grad phi(x) and the trace term from its phi model.
 */
inline double hamiltonian_density(const Vector& x, const Vector& p, const Vector& beta,
                                  const Vector& grad_phi_at_x, double lap_phi_term,
                                  const ControlProblem& problem) {
  detail::require_dim(beta.size(), problem.dim_x(), "hamiltonian_density beta");
  detail::require_dim(grad_phi_at_x.size(), problem.dim_x(), "hamiltonian_density grad_phi");
  return -0.5 * control_quadratic(x, p, problem) + p.dot(problem.drift(x)) + problem.running_cost(x) +
         beta.dot(grad_phi_at_x - p) + lap_phi_term;
}

}  // namespace mfpmp
