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

// Weyl operators X^k Z^l and the d+1 mutually unbiased bases
//   { eig(Z), eig(X Z^m) : m = 0..d-1 }
// for prime d.

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "rfiqkd/errors.hpp"
#include "rfiqkd/linalg.hpp"

namespace rfiqkd {

inline bool is_prime(int n) {
  if (n < 2) return false;
  for (int f = 2; f * f <= n; ++f) {
    if (n % f == 0) return false;
  }
  return true;
}

inline void require_prime(int d) {
  if (!is_prime(d)) throw InvalidInput("dimension must be a prime >= 2, got " + std::to_string(d));
}

inline int mod(long long a, int d) {
  const long long r = a % d;
  return static_cast<int>(r < 0 ? r + d : r);
}

/// Multiplicative inverse of k modulo prime d, k != 0.
inline int mod_inverse(int k, int d) {
  k = mod(k, d);
  if (k == 0) throw InvalidInput("mod_inverse: zero has no inverse");
  for (int x = 1; x < d; ++x) {
    if (mod(static_cast<long long>(k) * x, d) == 1) return x;
  }
  throw InvalidInput("mod_inverse: modulus is not prime");
}

/// omega^power with omega = exp(2 pi i / d).
inline Complex root_of_unity(int d, long long power) {
  return std::polar(1.0, 2.0 * kPi * mod(power, d) / d);
}

/// Exponent pair (k, l) of X^k Z^l, reduced modulo d.
struct WeylIndex {
  int k = 0;
  int l = 0;

  static WeylIndex reduced(long long k, long long l, int d) { return {mod(k, d), mod(l, d)}; }
  friend bool operator==(const WeylIndex&, const WeylIndex&) = default;
};

inline ComplexMatrix weyl_z(int d) {
  require_prime(d);
  ComplexMatrix z = ComplexMatrix::Zero(d, d);
  for (int j = 0; j < d; ++j) z(j, j) = root_of_unity(d, j);
  return z;
}

/// Cyclic shift |j> -> |j+1 mod d>.
inline ComplexMatrix weyl_x(int d) {
  require_prime(d);
  ComplexMatrix x = ComplexMatrix::Zero(d, d);
  for (int j = 0; j < d; ++j) x(mod(j + 1, d), j) = 1.0;
  return x;
}

/// X^k Z^l, built entrywise: X^k Z^l |j> = omega^{l j} |j + k>.
inline ComplexMatrix weyl_op(int d, WeylIndex idx) {
  require_prime(d);
  if (idx.k < 0 || idx.k >= d || idx.l < 0 || idx.l >= d) {
    throw InvalidInput("weyl_op: index out of range");
  }
  ComplexMatrix w = ComplexMatrix::Zero(d, d);
  for (int j = 0; j < d; ++j) w(mod(j + idx.k, d), j) = root_of_unity(d, static_cast<long long>(idx.l) * j);
  return w;
}

/// One of the d+1 measurement settings. `slope` is -1 for the Z basis and m
/// for the eigenbasis of X Z^m.
struct MubSetting {
  int d = 2;
  int slope = -1;

  bool is_z() const { return slope < 0; }
  /// Position in the canonical order Z, XZ0, XZ1, ..., XZ{d-1}.
  int index() const { return slope + 1; }

  std::string label() const { return is_z() ? std::string("Z") : "XZ" + std::to_string(slope); }

  static MubSetting from_index(int d, int index) { return {d, index - 1}; }

  static MubSetting from_label(int d, const std::string& label) {
    if (label == "Z") return {d, -1};
    if (label.size() > 2 && label.rfind("XZ", 0) == 0) {
      try {
        std::size_t used = 0;
        const int m = std::stoi(label.substr(2), &used);
        if (used == label.size() - 2 && m >= 0 && m < d) return {d, m};
      } catch (const std::exception&) {
      }
    }
    throw InvalidInput("unknown measurement setting label '" + label + "' for d=" + std::to_string(d));
  }

  friend bool operator==(const MubSetting&, const MubSetting&) = default;
};

/// Eigenbasis of a setting with outcome labels: column a is the outcome-a
/// eigenvector, eigenvalues[a] its eigenvalue under the setting's observable.
struct MubBasis {
  MubSetting setting;
  OrthonormalBasis basis;
  std::vector<Complex> eigenvalues;

  std::string label() const { return setting.label(); }
};

/// Common phase c of the spectrum of X Z^m: eigenvalues are c * omega^a.
/// (X Z^m)^d = omega^{m d (d-1) / 2} I, which is I for odd d and (-1)^m for d = 2.
inline Complex xz_spectrum_phase(int d, int m) {
  if (d % 2 == 1) return 1.0;
  return std::polar(1.0, kPi * m * (d - 1) / static_cast<double>(d));
}

/// Builds the labelled eigenbasis of one setting in closed form. The X Z^m
/// eigenvector for eigenvalue c omega^a has components
///   v_j = c^{-j} omega^{-a j + m j (j-1) / 2} / sqrt(d),
/// so v_0 is real positive.
inline MubBasis mub_basis(MubSetting s) {
  const int d = s.d;
  require_prime(d);
  if (s.slope < -1 || s.slope >= d) throw InvalidInput("mub_basis: slope out of range");
  ComplexMatrix vecs = ComplexMatrix::Zero(d, d);
  std::vector<Complex> evals(static_cast<std::size_t>(d));
  if (s.is_z()) {
    for (int a = 0; a < d; ++a) {
      vecs(a, a) = 1.0;
      evals[static_cast<std::size_t>(a)] = root_of_unity(d, a);
    }
  } else {
    const int m = s.slope;
    const Complex c = xz_spectrum_phase(d, m);
    const double c_arg = std::arg(c);
    const double norm = 1.0 / std::sqrt(static_cast<double>(d));
    for (int a = 0; a < d; ++a) {
      for (int j = 0; j < d; ++j) {
        const long long expo = -static_cast<long long>(a) * j + static_cast<long long>(m) * j * (j - 1) / 2;
        const double phase = 2.0 * kPi * mod(expo, d) / d - c_arg * j;
        vecs(j, a) = std::polar(norm, phase);
      }
      evals[static_cast<std::size_t>(a)] = c * root_of_unity(d, a);
    }
  }
  return MubBasis{s, OrthonormalBasis(std::move(vecs)), std::move(evals)};
}

/// All d+1 bases in canonical order Z, XZ0, ..., XZ{d-1}.
inline std::vector<MubBasis> mub_eigenbases(int d) {
  require_prime(d);
  std::vector<MubBasis> out;
  out.reserve(static_cast<std::size_t>(d + 1));
  for (int i = 0; i <= d; ++i) out.push_back(mub_basis(MubSetting::from_index(d, i)));
  return out;
}

/// The setting whose eigenbasis diagonalizes X^k Z^l. For k = 0 that is Z;
/// otherwise X^k Z^l is proportional to (X Z^m)^k with m = l k^{-1} mod d.
inline MubSetting setting_for(int d, WeylIndex idx) {
  if (idx.k == 0) return {d, -1};
  return {d, mod(static_cast<long long>(idx.l) * mod_inverse(idx.k, d), d)};
}

/// Eigenvalue of X^k Z^l on each outcome vector of its diagonalizing basis.
inline std::vector<Complex> outcome_weights(const MubBasis& basis, WeylIndex idx) {
  const int d = basis.setting.d;
  const ComplexMatrix w = weyl_op(d, idx);
  std::vector<Complex> out(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) {
    const ComplexVector v = basis.basis.vector(a);
    out[static_cast<std::size_t>(a)] = v.dot(w * v);  // <v|W|v>, v is an eigenvector
  }
  return out;
}

}  // namespace rfiqkd
