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

// Reproducible Gaussian sampling.
//
// Uniforms come from std::mt19937_64, whose output sequence is fixed by the
// C++ standard. Normals use the Box-Muller transform on 53-bit uniforms
// rather than std::normal_distribution, whose algorithm is
// implementation-defined. Streams for independent tasks (e.g. Monte-Carlo
// paths) are derived with splitmix64(seed ^ splitmix64(index)).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "mfpmp/core.hpp"

namespace mfpmp {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static GaussianSampler for_stream(std::uint64_t seed, std::uint64_t stream) {
    return GaussianSampler(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Vector normal_vector(long n) {
    Vector v(n);
    for (long k = 0; k < n; ++k) v(k) = normal();
    return v;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Symmetric square root of a PSD matrix (negative round-off clipped to zero).
inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace mfpmp
