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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "mfpmp/core.hpp"
#include "mfpmp/problem.hpp"
#include "mfpmp/random.hpp"

namespace mfpmp {

/// Controlled inverted pendulum with friction, state (theta, v).
struct PendulumParams {
  double friction = 5.0;
  double alpha = 25.0;
  double R = 1.0;
  double sigma = 0.1;  // Sigma = sigma * I
  HorizonSpec horizon = DiscountedInfinite{1.0};
};

struct Lorenz63Params {
  double sigma_l = 10.0;
  double r = 28.0;
  double b = 8.0 / 3.0;
  double alpha = 5000.0;
  double R = 1.0;
  double sigma = 0.5;
  HorizonSpec horizon = DiscountedInfinite{1.0};
};

inline ControlProblem make_pendulum(const PendulumParams& prm = {}) {
  ProblemDefinition def;
  def.dim_x = 2;
  def.dim_u = 1;
  const double fr = prm.friction;
  const double alpha = prm.alpha;
  const double r = prm.R;
  def.drift = [fr](const Vector& x) -> Vector {
    return Eigen::Vector2d(x(1), std::sin(x(0)) - fr * x(1));
  };
  def.drift_jacobian = [fr](const Vector& x) -> Matrix {
    Eigen::Matrix2d j;
    j << 0.0, 1.0, std::cos(x(0)), -fr;
    return j;
  };
  def.control_matrix = [](const Vector& x) -> Matrix {
    Matrix g(2, 1);
    g << 0.0, std::cos(x(0));
    return g;
  };
  // d/dtheta (R cos^2(theta) p_v^2)
  def.control_quadratic_grad = [r](const Vector& x, const Vector& p) -> Vector {
    return Eigen::Vector2d(-2.0 * r * std::sin(x(0)) * std::cos(x(0)) * p(1) * p(1), 0.0);
  };
  def.running_cost = [alpha](const Vector& x) { return 0.5 * alpha * x.squaredNorm(); };
  def.running_cost_grad = [alpha](const Vector& x) -> Vector { return alpha * x; };
  def.terminal_cost = [](const Vector&) { return 0.0; };
  def.terminal_cost_grad = [](const Vector&) -> Vector { return Vector::Zero(2); };
  def.weight_R = Matrix::Constant(1, 1, r);
  def.diffusion = prm.sigma * Matrix::Identity(2, 2);
  def.horizon = prm.horizon;
  return ControlProblem(std::move(def));
}

inline ControlProblem make_lorenz63(const Lorenz63Params& prm = {}) {
  ProblemDefinition def;
  def.dim_x = 3;
  def.dim_u = 3;
  const double s = prm.sigma_l, r = prm.r, b = prm.b, alpha = prm.alpha;
  def.drift = [s, r, b](const Vector& x) -> Vector {
    return Eigen::Vector3d(s * (x(1) - x(0)), -x(0) * x(2) + r * x(0) - x(1), x(0) * x(1) - b * x(2));
  };
  def.drift_jacobian = [s, r, b](const Vector& x) -> Matrix {
    Eigen::Matrix3d j;
    j << -s, s, 0.0,
         r - x(2), -1.0, -x(0),
         x(1), x(0), -b;
    return j;
  };
  def.control_matrix = [](const Vector&) -> Matrix { return Matrix::Identity(3, 3); };
  def.running_cost = [alpha](const Vector& x) {
    const double neg = std::min(x(0), 0.0);
    return 0.5 * alpha * neg * neg;
  };
  def.running_cost_grad = [alpha](const Vector& x) -> Vector {
    return Eigen::Vector3d(alpha * std::min(x(0), 0.0), 0.0, 0.0);
  };
  def.terminal_cost = [](const Vector&) { return 0.0; };
  def.terminal_cost_grad = [](const Vector&) -> Vector { return Vector::Zero(3); };
  def.weight_R = prm.R * Matrix::Identity(3, 3);
  def.diffusion = prm.sigma * Matrix::Identity(3, 3);
  def.horizon = prm.horizon;
  def.constant_control_matrix = true;
  return ControlProblem(std::move(def));
}

/// Linear dynamics b(x) = A_dyn x, constant G, c = 1/2 x^T Q x, f = 1/2 x^T F x.
struct LqrProblem {
  Matrix A_dyn;
  Matrix G;
  Matrix Q;
  Matrix F;  // empty means zero
  Matrix R;
  Matrix sigma;  // empty means zero
  HorizonSpec horizon = DiscountedInfinite{1.0};
};

inline ControlProblem lqr_make(const LqrProblem& spec) {
  const long n = spec.A_dyn.rows();
  detail::require(n > 0 && spec.A_dyn.cols() == n, "lqr_make: A_dyn must be square");
  detail::require_dim(spec.G.rows(), n, "lqr_make G rows");
  detail::require_dim(spec.Q.rows(), n, "lqr_make Q rows");
  detail::require_dim(spec.Q.cols(), n, "lqr_make Q cols");
  const Matrix f = spec.F.size() == 0 ? Matrix::Zero(n, n) : spec.F;
  detail::require_dim(f.rows(), n, "lqr_make F rows");
  detail::require(detail::is_psd(spec.Q), "lqr_make: Q must be symmetric positive semidefinite");
  detail::require(detail::is_psd(f), "lqr_make: F must be symmetric positive semidefinite");

  ProblemDefinition def;
  def.dim_x = static_cast<int>(n);
  def.dim_u = static_cast<int>(spec.G.cols());
  const Matrix a = spec.A_dyn, g = spec.G, q = spec.Q;
  def.drift = [a](const Vector& x) -> Vector { return a * x; };
  def.drift_jacobian = [a](const Vector&) -> Matrix { return a; };
  def.control_matrix = [g](const Vector&) -> Matrix { return g; };
  def.control_quadratic_grad = [n](const Vector&, const Vector&) -> Vector { return Vector::Zero(n); };
  def.running_cost = [q](const Vector& x) { return 0.5 * x.dot(q * x); };
  def.running_cost_grad = [q](const Vector& x) -> Vector { return q * x; };
  def.terminal_cost = [f](const Vector& x) { return 0.5 * x.dot(f * x); };
  def.terminal_cost_grad = [f](const Vector& x) -> Vector { return f * x; };
  def.weight_R = spec.R;
  def.diffusion = spec.sigma.size() == 0 ? Matrix::Zero(n, n) : spec.sigma;
  def.horizon = spec.horizon;
  def.constant_control_matrix = true;
  return ControlProblem(std::move(def));
}

/// Scalar dx = u dt, c = 1/2 x^2, R = 1.
inline LqrProblem lqr_scalar_spec(HorizonSpec horizon = DiscountedInfinite{0.2}, double sigma = 0.5,
                               double terminal = 0.0) {
  LqrProblem s;
  s.A_dyn = Matrix::Zero(1, 1);
  s.G = Matrix::Ones(1, 1);
  s.Q = Matrix::Ones(1, 1);
  s.F = Matrix::Constant(1, 1, terminal);
  s.R = Matrix::Ones(1, 1);
  s.sigma = Matrix::Constant(1, 1, sigma);
  s.horizon = horizon;
  return s;
}

/// Two-dimensional, fully actuated LQR with a symmetric drift that has one unstable direction.
inline LqrProblem lqr_2d_spec(HorizonSpec horizon = DiscountedInfinite{0.2}, double sigma = 0.5,
                           double terminal = 0.0) {
  LqrProblem s;
  s.A_dyn.resize(2, 2);
  s.A_dyn << 0.5, 0.2, 0.2, -0.3;
  s.G = Matrix::Identity(2, 2);
  s.Q.resize(2, 2);
  s.Q << 1.0, 0.0, 0.0, 2.0;
  s.F = terminal * Matrix::Identity(2, 2);
  s.R = Matrix::Identity(2, 2);
  s.sigma = sigma * Matrix::Identity(2, 2);
  s.horizon = horizon;
  return s;
}

/// Gaussian cloud N(center, variance I) with momenta P = momentum_map X.
inline EnsembleState gaussian_ensemble(const Vector& center, double variance, long M, std::uint64_t seed,
                                       const Matrix* momentum_map = nullptr) {
  detail::require(M >= 1, "initial ensemble: M must be at least 1");
  detail::require(variance >= 0.0, "initial ensemble: variance must be non-negative");
  GaussianSampler rng(seed);
  const long d = center.size();
  const double sd = std::sqrt(variance);
  Matrix x(d, M);
  for (long i = 0; i < M; ++i) {
    for (long k = 0; k < d; ++k) x(k, i) = center(k) + sd * rng.normal();
  }
  Matrix p = momentum_map ? Matrix((*momentum_map) * x) : Matrix::Zero(d, M);
  return EnsembleState(0.0, std::move(x), std::move(p));
}

/// X0 ~ N((pi, 0), 0.1 I), P0 = -2 S X0 with S = [[0, 1], [1, 0]].
inline EnsembleState pendulum_initial_ensemble(long M, std::uint64_t seed) {
  Matrix map(2, 2);
  map << 0.0, -2.0, -2.0, 0.0;
  return gaussian_ensemble(Eigen::Vector2d(std::numbers::pi, 0.0), 0.1, M, seed, &map);
}

/// X0 = (7.8590, 7.1136, 27.2293) + N(0, 0.1 I), P0 = 0.
inline EnsembleState lorenz_initial_ensemble(long M, std::uint64_t seed) {
  return gaussian_ensemble(Eigen::Vector3d(7.8590, 7.1136, 27.2293), 0.1, M, seed);
}

// ---------------------------------------------------------------------------
// Registry used by the command line tools.

using ParameterOverrides = std::map<std::string, std::string>;

struct Benchmark {
  std::string id;
  std::string description;
  ControlProblem problem;
  std::function<EnsembleState(long, std::uint64_t)> sample;
};

inline const std::vector<std::pair<std::string, std::string>>& benchmark_catalog() {
  static const std::vector<std::pair<std::string, std::string>> catalog = {
      {"pendulum", "inverted pendulum with friction, discounted (gamma=1), Sigma=0.1 I"},
      {"lorenz63", "Lorenz-63 restricted to x >= 0, discounted (gamma=1), Sigma=0.5 I"},
      {"lqr-scalar", "dx = u dt, c = x^2/2, R = 1 (discounted or finite horizon)"},
      {"lqr-2d", "fully actuated 2-d LQR with symmetric drift (discounted or finite horizon)"},
  };
  return catalog;
}

namespace detail {

class OverrideReader {
 public:
  explicit OverrideReader(const ParameterOverrides& o) : o_(o) {}

  double number(const std::string& key, double fallback) {
    used_.push_back(key);
    const auto it = o_.find(key);
    if (it == o_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      throw InvalidArgument("problem override '" + key + "': not a number: " + it->second);
    }
  }

  std::string text(const std::string& key, const std::string& fallback) {
    used_.push_back(key);
    const auto it = o_.find(key);
    return it == o_.end() ? fallback : it->second;
  }

  HorizonSpec horizon(const std::string& default_kind, double default_gamma, double default_T) {
    const std::string kind = text("horizon", default_kind);
    const double gamma = number("gamma", default_gamma);
    const double T = number("T", default_T);
    if (kind == "discounted") return DiscountedInfinite{gamma};
    if (kind == "finite") return FiniteHorizon{T};
    throw InvalidArgument("problem override 'horizon' must be 'discounted' or 'finite', got '" + kind + "'");
  }

  void finish() const {
    for (const auto& [key, value] : o_) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
        throw InvalidArgument("unknown problem parameter '" + key + "'");
      }
    }
  }

 private:
  const ParameterOverrides& o_;
  std::vector<std::string> used_;
};

}  // namespace detail

/**
 * Builds a bundled benchmark by id. Recognised overrides: horizon
 * (discounted|finite), gamma, T, sigma (viscosity scale), plus
 * friction/alpha/R for the pendulum, alpha/R for Lorenz-63 and
 * terminal (F = terminal * I) for the LQR problems.
 */
inline Benchmark make_benchmark(const std::string& id, const ParameterOverrides& overrides = {}) {
  detail::OverrideReader in(overrides);
  if (id == "pendulum") {
    PendulumParams prm;
    prm.friction = in.number("friction", prm.friction);
    prm.alpha = in.number("alpha", prm.alpha);
    prm.R = in.number("R", prm.R);
    prm.sigma = in.number("sigma", prm.sigma);
    prm.horizon = in.horizon("discounted", 1.0, 1.0);
    in.finish();
    return {id, benchmark_catalog()[0].second, make_pendulum(prm), pendulum_initial_ensemble};
  }
  if (id == "lorenz63") {
    Lorenz63Params prm;
    prm.alpha = in.number("alpha", prm.alpha);
    prm.R = in.number("R", prm.R);
    prm.sigma = in.number("sigma", prm.sigma);
    prm.horizon = in.horizon("discounted", 1.0, 1.0);
    in.finish();
    return {id, benchmark_catalog()[1].second, make_lorenz63(prm), lorenz_initial_ensemble};
  }
  if (id == "lqr-scalar" || id == "lqr-2d") {
    const HorizonSpec h = in.horizon("discounted", 0.2, 1.0);
    const double sigma = in.number("sigma", 0.5);
    const double terminal = in.number("terminal", 0.0);
    in.finish();
    const bool scalar = id == "lqr-scalar";
    const LqrProblem spec = scalar ? lqr_scalar_spec(h, sigma, terminal) : lqr_2d_spec(h, sigma, terminal);
    const long d = spec.A_dyn.rows();
    auto sampler = [d](long M, std::uint64_t seed) { return gaussian_ensemble(Vector::Zero(d), 1.0, M, seed); };
    return {id, benchmark_catalog()[scalar ? 2 : 3].second, lqr_make(spec), sampler};
  }
  throw InvalidArgument("unknown problem id '" + id + "'");
}

}  // namespace mfpmp
