// Copyright 2026 The rfi-qkd-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

// Random inputs shared by the test binaries. Every generator takes an explicit
// engine so each test is reproducible.

#include <complex>
#include <cstdint>
#include <random>

#include "rfiqkd/linalg.hpp"
#include "rfiqkd/states.hpp"

namespace rfiqkd::testing {

inline ComplexVector haar_vector(int n, std::mt19937_64& g) {
  std::normal_distribution<double> normal;
  ComplexVector v(n);
  for (int i = 0; i < n; ++i) v(i) = Complex(normal(g), normal(g));
  return v / v.norm();
}

inline ComplexMatrix random_hermitian(int n, std::mt19937_64& g) {
  std::normal_distribution<double> normal;
  ComplexMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = Complex(normal(g), normal(g));
  return 0.5 * (a + a.adjoint());
}

/// Ginibre-distributed mixed state of full rank.
inline DensityMatrix random_state(int n, std::mt19937_64& g) {
  std::normal_distribution<double> normal;
  ComplexMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = Complex(normal(g), normal(g));
  ComplexMatrix m = a * a.adjoint();
  m /= m.trace().real();
  return DensityMatrix(0.5 * (m + m.adjoint()));
}

inline ComplexMatrix projector(const ComplexVector& v) { return v * v.adjoint(); }

inline DensityMatrix random_product_state(int d, std::mt19937_64& g) {
  return DensityMatrix(kron(projector(haar_vector(d, g)), projector(haar_vector(d, g))));
}

/// Convex mixture of `terms` random product states with random weights.
inline DensityMatrix random_separable_state(int d, std::mt19937_64& g, int terms = 4) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  ComplexMatrix m = ComplexMatrix::Zero(d * d, d * d);
  double total = 0.0;
  for (int t = 0; t < terms; ++t) {
    const double w = uni(g) + 1e-3;
    m += w * random_product_state(d, g).matrix();
    total += w;
  }
  m /= total;
  return DensityMatrix(0.5 * (m + m.adjoint()));
}

inline ComplexMatrix random_z_frame(int d, std::mt19937_64& g) { return z_commuting_unitary(d, g()); }

}  // namespace rfiqkd::testing
