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

// Discrete Schrodinger bridge over a particle cloud.
//
// The kernel d_ij = exp(-|X_i - X_j|^2_W / (2 eps)) with W = Sigma^{-1} is
// scaled symmetrically, K = diag(v) d diag(v), until K is doubly stochastic.
// The generator m = (K - I) / eps then has zero row and column sums and
// approximates the reversible diffusion generator of the cloud's density,
// so that sum_j m_ij X_j ~ 1/2 Sigma grad log rho(X_i).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "mfpmp/core.hpp"
#include "mfpmp/problem.hpp"

namespace mfpmp {

struct SinkhornOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

struct SinkhornResult {
  Vector scalings;
  int iterations = 0;
  double residual = 0.0;
};

struct BridgeCoefficients {
  double epsilon = 0.0;
  Matrix kernel;
  Vector scalings;
  Matrix generator;
  int iterations = 0;
  double residual = 0.0;

  long size() const noexcept { return generator.rows(); }
};

/// Distance weight W used by the kernel: the inverse of Sigma with every
/// eigenvalue floored at `sigma_floor`.
inline Matrix bridge_weight(const Matrix& sigma, double sigma_floor = 0.0) {
  detail::require(sigma.rows() == sigma.cols(), "bridge_weight: Sigma must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  Vector lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (sigma_floor > 0.0) {
      lambda(k) = std::max(lambda(k), sigma_floor);
    } else if (lambda(k) <= 1e-14 * scale) {
      throw InvalidArgument(
          "bridge kernel: Sigma is singular and no viscosity floor (sigma_floor) is configured");
    }
  }
  return eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

inline Matrix kernel_matrix(const EnsembleState& ensemble, double epsilon, const Matrix& sigma,
                            double sigma_floor = 0.0) {
  detail::require(epsilon > 0.0, "kernel_matrix: epsilon must be positive");
  detail::require_dim(sigma.rows(), ensemble.dim(), "kernel_matrix Sigma");
  const Matrix w = bridge_weight(sigma, sigma_floor);
  const Eigen::LLT<Matrix> w_chol(w);
  // |x|_W^2 = |L^T x|^2
  const Matrix z = w_chol.matrixU() * ensemble.X;
  const long n = ensemble.size();
  const double scale = -0.5 / epsilon;
  Matrix d(n, n);
  for (long j = 0; j < n; ++j) {
    d(j, j) = 1.0;
    for (long i = j + 1; i < n; ++i) {
      const double dist = (z.col(i) - z.col(j)).squaredNorm();
      // floored so that distant pairs stay strictly positive after underflow
      const double value = std::max(std::exp(scale * dist), std::numeric_limits<double>::min());
      d(i, j) = value;
      d(j, i) = value;
    }
  }
  return d;
}

/**
 * Symmetric Sinkhorn scaling by the damped fixed point v <- sqrt(v / (D v)).
 * Convergence is declared when max_i |v_i (D v)_i - 1| <= tol.
 */
inline SinkhornResult sinkhorn_scalings(const Matrix& kernel, const SinkhornOptions& opts = {},
                                        const Vector* warm_start = nullptr) {
  detail::require(kernel.rows() == kernel.cols(), "sinkhorn_scalings: kernel must be square");
  const long n = kernel.rows();
  detail::require(n >= 1, "sinkhorn_scalings: empty kernel");
  if (kernel.minCoeff() <= 0.0 || !kernel.allFinite()) {
    throw InvalidArgument("sinkhorn_scalings: kernel entries must be strictly positive");
  }

  SinkhornResult out;
  if (warm_start && warm_start->size() == n && warm_start->minCoeff() > 0.0 && warm_start->allFinite()) {
    out.scalings = *warm_start;
  } else {
    out.scalings = Vector::Ones(n);
  }
  Vector& v = out.scalings;
  Vector dv(n);
  for (int it = 0;; ++it) {
    dv.noalias() = kernel * v;
    out.residual = (v.cwiseProduct(dv).array() - 1.0).abs().maxCoeff();
    out.iterations = it;
    if (out.residual <= opts.tol) return out;
    if (it >= opts.max_iter || !std::isfinite(out.residual)) {
      throw SinkhornError("Sinkhorn scaling did not converge: residual " + std::to_string(out.residual) +
                              " after " + std::to_string(it) + " iterations",
                          it, out.residual);
    }
    v = (v.array() / dv.array()).sqrt();
  }
}

/// m_ij = (v_i d_ij v_j - delta_ij) / eps, built symmetric entry by entry.
inline Matrix bridge_coefficients(const Matrix& kernel, const Vector& scalings, double epsilon) {
  detail::require(epsilon > 0.0, "bridge_coefficients: epsilon must be positive");
  detail::require(kernel.rows() == kernel.cols(), "bridge_coefficients: kernel must be square");
  detail::require_dim(scalings.size(), kernel.rows(), "bridge_coefficients scalings");
  const long n = kernel.rows();
  const double inv_eps = 1.0 / epsilon;
  Matrix m(n, n);
  for (long j = 0; j < n; ++j) {
    m(j, j) = (scalings(j) * kernel(j, j) * scalings(j) - 1.0) * inv_eps;
    for (long i = j + 1; i < n; ++i) {
      const double value = scalings(i) * kernel(i, j) * scalings(j) * inv_eps;
      m(i, j) = value;
      m(j, i) = value;
    }
  }
  return m;
}

/// Builds kernel, scalings and generator for the current positions.
inline BridgeCoefficients build_bridge(const EnsembleState& ensemble, double epsilon, const Matrix& sigma,
                                       const SinkhornOptions& opts = {}, double sigma_floor = 0.0,
                                       const Vector* warm_start = nullptr) {
  BridgeCoefficients bc;
  bc.epsilon = epsilon;
  bc.kernel = kernel_matrix(ensemble, epsilon, sigma, sigma_floor);
  SinkhornResult sk = sinkhorn_scalings(bc.kernel, opts, warm_start);
  bc.scalings = std::move(sk.scalings);
  bc.iterations = sk.iterations;
  bc.residual = sk.residual;
  bc.generator = bridge_coefficients(bc.kernel, bc.scalings, epsilon);
  return bc;
}

/// Column i of the result is sum_j m_ij values.col(j).
inline Matrix apply_generator(const Matrix& m, const Matrix& values) {
  detail::require_dim(values.cols(), m.rows(), "apply_generator values");
  return values * m.transpose();
}

inline Vector apply_generator(const Matrix& m, const Vector& values) {
  detail::require_dim(values.size(), m.rows(), "apply_generator values");
  return m * values;
}

}  // namespace mfpmp
