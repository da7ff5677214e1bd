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

#include "mfpmp/core.hpp"
#include "mfpmp/problem.hpp"

namespace mfpmp {

/// grad phi(x) ~ A x + c, from phi(x) = 1/2 x^T A x + x^T c.
struct AffineGradientModel {
  Matrix A;
  Vector c;
  bool symmetrized = false;

  static AffineGradientModel zero(long dim) {
    return {Matrix::Zero(dim, dim), Vector::Zero(dim), true};
  }
  long dim() const noexcept { return c.size(); }
};

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

/**
 * Least-squares fit of P ~ A X + c over the ensemble.
 *
 * A = C^{px} (C^{xx} + lambda I)^{-1} with unbiased covariances and ridge
 * lambda = 1e-8 trace(C^{xx}) / d. With `symmetrize` the fitted A is replaced
 * by its symmetric part and c is recomputed so the model still maps the mean
 * of X to the mean of P. A single particle yields A = 0, c = P.
 */
inline AffineGradientModel fit_affine_gradient(const EnsembleState& ensemble, bool symmetrize_fit = true) {
  const long n = ensemble.size();
  const long d = ensemble.dim();
  detail::require(n >= 1, "fit_affine_gradient: empty ensemble");

  const Vector mx = ensemble.X.rowwise().mean();
  const Vector mp = ensemble.P.rowwise().mean();
  if (n == 1) return {Matrix::Zero(d, d), mp, symmetrize_fit};

  const Matrix xc = ensemble.X.colwise() - mx;
  const Matrix pc = ensemble.P.colwise() - mp;
  const double norm = 1.0 / static_cast<double>(n - 1);
  Matrix cxx = norm * (xc * xc.transpose());
  const Matrix cpx = norm * (pc * xc.transpose());

  const double trace = cxx.trace();
  if (!(trace > 0.0) || !std::isfinite(trace)) {
    throw DegenerateEnsembleError("fit_affine_gradient: particle positions have zero spread");
  }
  cxx.diagonal().array() += 1e-8 * trace / static_cast<double>(d);
  const Eigen::LDLT<Matrix> ldlt(cxx);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw DegenerateEnsembleError("fit_affine_gradient: covariance not invertible after ridge");
  }
  // A C = C^{px}  <=>  C A^T = (C^{px})^T since C is symmetric
  Matrix a = ldlt.solve(cpx.transpose()).transpose();
  if (!a.allFinite()) throw DegenerateEnsembleError("fit_affine_gradient: non-finite fit");
  if (symmetrize_fit) a = symmetrize(a);
  Vector c = mp - a * mx;
  return {std::move(a), std::move(c), symmetrize_fit};
}

inline Vector eval_grad_phi(const AffineGradientModel& model, const Vector& x) {
  detail::require_dim(x.size(), model.dim(), "eval_grad_phi");
  return model.A * x + model.c;
}

/// Columns A X_i + c for every particle.
inline Matrix eval_grad_phi(const AffineGradientModel& model, const Matrix& xs) {
  detail::require_dim(xs.rows(), model.dim(), "eval_grad_phi");
  return (model.A * xs).colwise() + model.c;
}

/// (1 / 2M) sum_i |P_i - (A X_i + c)|^2
inline double residual(const EnsembleState& ensemble, const AffineGradientModel& model) {
  detail::require_dim(ensemble.dim(), model.dim(), "residual");
  const Matrix diff = ensemble.P - eval_grad_phi(model, ensemble.X);
  return diff.squaredNorm() / (2.0 * static_cast<double>(ensemble.size()));
}

/// Frobenius-type distance between two models, sqrt(|dA|_F^2 + |dc|^2).
inline double model_distance(const AffineGradientModel& a, const AffineGradientModel& b) {
  return std::sqrt((a.A - b.A).squaredNorm() + (a.c - b.c).squaredNorm());
}

}  // namespace mfpmp
