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

// Weyl correlators and the frame-independent C parameter
//   C = sum_{k1,k2 >= 1; l1,l2} |<X_A^{k1} Z^{l1} (x) X_B^{k2} Z^{l2}>|^2.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "rfiqkd/errors.hpp"
#include "rfiqkd/linalg.hpp"
#include "rfiqkd/qudit.hpp"
#include "rfiqkd/states.hpp"

namespace rfiqkd {

/// <X_A^{k1} Z^{l1} (x) X_B^{k2} Z^{l2}> for all (k1, l1, k2, l2) in [0, d)^4.
class CorrelatorTable {
 public:
  explicit CorrelatorTable(int d) : d_(d), values_(static_cast<std::size_t>(d) * d * d * d) {
    require_prime(d);
  }

  int d() const { return d_; }

  Complex& at(WeylIndex a, WeylIndex b) { return values_[offset(a, b)]; }
  const Complex& at(WeylIndex a, WeylIndex b) const { return values_[offset(a, b)]; }

  const std::vector<Complex>& values() const { return values_; }

  void validate(double tol = 1e-9) const {
    if (std::abs(at({0, 0}, {0, 0}) - Complex(1.0)) > tol) {
      throw InvalidInput("CorrelatorTable: identity correlator must equal 1");
    }
    for (const auto& v : values_) {
      if (std::abs(v) > 1.0 + tol) throw InvalidInput("CorrelatorTable: correlator modulus exceeds 1");
    }
  }

  double max_abs_diff(const CorrelatorTable& other) const {
    detail::require(other.d_ == d_, "CorrelatorTable: dimension mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) m = std::max(m, std::abs(values_[i] - other.values_[i]));
    return m;
  }

 private:
  std::size_t offset(WeylIndex a, WeylIndex b) const {
    if (a.k < 0 || a.k >= d_ || a.l < 0 || a.l >= d_ || b.k < 0 || b.k >= d_ || b.l < 0 || b.l >= d_) {
      throw InvalidInput("CorrelatorTable: index out of range");
    }
    return ((static_cast<std::size_t>(a.k) * d_ + a.l) * d_ + b.k) * d_ + b.l;
  }

  int d_;
  std::vector<Complex> values_;
};

/// Local Weyl operators in a rotated frame: U X^k Z^l U^dagger.
inline std::vector<ComplexMatrix> framed_weyl_ops(int d, const ComplexMatrix& frame) {
  std::vector<ComplexMatrix> ops;
  ops.reserve(static_cast<std::size_t>(d * d));
  for (int k = 0; k < d; ++k) {
    for (int l = 0; l < d; ++l) ops.push_back(frame * weyl_op(d, {k, l}) * frame.adjoint());
  }
  return ops;
}

/// Tr(rho (X_A^{k1} Z^{l1} (x) X_B^{k2} Z^{l2})) with X_A = U X U^dagger, X_B = V X V^dagger.
inline CorrelatorTable correlators_from_state(const DensityMatrix& rho, const ComplexMatrix& u_a,
                                              const ComplexMatrix& v_b) {
  const int d = bipartite_dim(rho);
  detail::require(u_a.rows() == d && u_a.cols() == d && v_b.rows() == d && v_b.cols() == d,
                  "correlators_from_state: frame dimension mismatch");
  detail::require(is_unitary(u_a) && is_unitary(v_b), "correlators_from_state: frames must be unitary");
  const auto ops_a = framed_weyl_ops(d, u_a);
  const auto ops_b = framed_weyl_ops(d, v_b);
  const ComplexMatrix& m = rho.matrix();
  CorrelatorTable table(d);
  ComplexMatrix reduced(d, d);
  for (int ia = 0; ia < d * d; ++ia) {
    const ComplexMatrix& a = ops_a[static_cast<std::size_t>(ia)];
    // reduced(j, j') = sum_{i, i'} rho(i j, i' j') A(i', i); then contract with B(j', j).
    reduced.setZero();
    for (int i = 0; i < d; ++i) {
      for (int ip = 0; ip < d; ++ip) {
        const Complex aval = a(ip, i);
        if (aval == Complex{}) continue;
        reduced += aval * m.block(i * d, ip * d, d, d);
      }
    }
    for (int ib = 0; ib < d * d; ++ib) {
      const ComplexMatrix& b = ops_b[static_cast<std::size_t>(ib)];
      const Complex value = reduced.cwiseProduct(b.transpose()).sum();
      table.at({ia / d, ia % d}, {ib / d, ib % d}) = value;
    }
  }
  return table;
}

inline CorrelatorTable correlators_from_state(const DensityMatrix& rho) {
  const int d = bipartite_dim(rho);
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  return correlators_from_state(rho, id, id);
}

inline double c_parameter(const CorrelatorTable& table) {
  const int d = table.d();
  double c = 0.0;
  for (int k1 = 1; k1 < d; ++k1) {
    for (int l1 = 0; l1 < d; ++l1) {
      for (int k2 = 1; k2 < d; ++k2) {
        for (int l2 = 0; l2 < d; ++l2) c += std::norm(table.at({k1, l1}, {k2, l2}));
      }
    }
  }
  return c;
}

inline double separable_bound(int d) { return (d - 1.0) * (d - 1.0); }
inline double maximal_c(int d) { return d * (d - 1.0); }

enum class Verdict { entangled, inconclusive };

inline std::string to_string(Verdict v) { return v == Verdict::entangled ? "entangled" : "inconclusive"; }

/// Separable states satisfy C <= (d-1)^2; only a strict violation certifies entanglement.
inline Verdict witness_verdict(double c, int d) {
  detail::require(c >= 0.0, "witness_verdict: C must be non-negative");
  return c > separable_bound(d) + 1e-9 ? Verdict::entangled : Verdict::inconclusive;
}

/// The four partial sums of |<...>|^2 over all (k1,l1,k2,l2), over k1 = 0,
/// over k2 = 0, and over k1 = k2 = 0. C is full - alice_z - bob_z + both_z and
/// full equals d^2 Tr(rho^2).
struct CDecomposition {
  double full = 0.0;
  double alice_z = 0.0;  // k1 = 0: Z^{l1} (x) X_B^{k2} Z^{l2}
  double bob_z = 0.0;    // k2 = 0: X_A^{k1} Z^{l1} (x) Z^{l2}
  double both_z = 0.0;   // Z^{l1} (x) Z^{l2}

  double combination() const { return full - alice_z - bob_z + both_z; }
};

inline CDecomposition c_decomposition_check(const DensityMatrix& rho, const ComplexMatrix& u_a,
                                            const ComplexMatrix& v_b, double tol = 1e-9) {
  const int d = bipartite_dim(rho);
  const CorrelatorTable t = correlators_from_state(rho, u_a, v_b);
  CDecomposition out;
  for (int k1 = 0; k1 < d; ++k1) {
    for (int l1 = 0; l1 < d; ++l1) {
      for (int k2 = 0; k2 < d; ++k2) {
        for (int l2 = 0; l2 < d; ++l2) {
          const double v = std::norm(t.at({k1, l1}, {k2, l2}));
          out.full += v;
          if (k1 == 0) out.alice_z += v;
          if (k2 == 0) out.bob_z += v;
          if (k1 == 0 && k2 == 0) out.both_z += v;
        }
      }
    }
  }
  const double purity_sum = d * d * rho.purity();
  if (std::abs(out.full - purity_sum) > tol) {
    throw std::logic_error("c_decomposition_check: full sum differs from d^2 Tr(rho^2)");
  }
  if (std::abs(out.combination() - c_parameter(t)) > tol) {
    throw std::logic_error("c_decomposition_check: signed combination differs from C");
  }
  return out;
}

inline std::string correlator_key(WeylIndex a, WeylIndex b) {
  std::ostringstream s;
  s << a.k << ',' << a.l << ',' << b.k << ',' << b.l;
  return s.str();
}

inline nlohmann::json to_json(const CorrelatorTable& t) {
  nlohmann::json values = nlohmann::json::object();
  const int d = t.d();
  for (int k1 = 0; k1 < d; ++k1)
    for (int l1 = 0; l1 < d; ++l1)
      for (int k2 = 0; k2 < d; ++k2)
        for (int l2 = 0; l2 < d; ++l2) {
          const Complex v = t.at({k1, l1}, {k2, l2});
          values[correlator_key({k1, l1}, {k2, l2})] = {v.real(), v.imag()};
        }
  return {{"d", d}, {"values", values}};
}

inline CorrelatorTable correlators_from_json(const nlohmann::json& j) {
  try {
    const int d = j.at("d").get<int>();
    CorrelatorTable t(d);
    const auto& values = j.at("values");
    for (int k1 = 0; k1 < d; ++k1)
      for (int l1 = 0; l1 < d; ++l1)
        for (int k2 = 0; k2 < d; ++k2)
          for (int l2 = 0; l2 < d; ++l2) {
            const auto& v = values.at(correlator_key({k1, l1}, {k2, l2}));
            t.at({k1, l1}, {k2, l2}) = Complex(v.at(0).get<double>(), v.at(1).get<double>());
          }
    t.validate();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed CorrelatorTable JSON: ") + e.what());
  }
}

}  // namespace rfiqkd
