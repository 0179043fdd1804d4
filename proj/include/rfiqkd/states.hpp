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

// Bipartite qudit states, channels and simulated measurement statistics.
// Composite index convention: |a b> lives at row a * d + b (Alice first).

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "rfiqkd/errors.hpp"
#include "rfiqkd/linalg.hpp"
#include "rfiqkd/qudit.hpp"

namespace rfiqkd {

/// Trace-one positive semidefinite Hermitian matrix.
class DensityMatrix {
 public:
  explicit DensityMatrix(ComplexMatrix m) : m_(std::move(m)) {
    if (!is_hermitian(m_)) throw InvalidInput("DensityMatrix: not Hermitian");
    if (std::abs(m_.trace() - Complex(1.0)) > tol::kEntry) throw InvalidInput("DensityMatrix: trace != 1");
    const auto e = eig_hermitian(m_);
    if (e.values.back() < -tol::kPsd) throw InvalidInput("DensityMatrix: negative eigenvalue");
  }

  Eigen::Index dim() const { return m_.rows(); }
  const ComplexMatrix& matrix() const { return m_; }
  double purity() const { return (m_ * m_).trace().real(); }

  /// Local dimension d of a d x d bipartite state.
  int local_dim() const {
    const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim()))));
    if (d * d != dim()) throw InvalidInput("expected a bipartite state on dimension d^2");
    return d;
  }

 private:
  ComplexMatrix m_;
};

inline int bipartite_dim(const DensityMatrix& rho) {
  const int d = rho.local_dim();
  require_prime(d);
  return d;
}

inline DensityMatrix maximally_mixed(int dim) {
  return DensityMatrix(ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim));
}

inline DensityMatrix pure_state(const ComplexVector& psi) {
  const ComplexVector v = psi / psi.norm();
  return DensityMatrix(v * v.adjoint());
}

// ---------------------------------------------------------------------------
// Bell basis

/// |Phi_{k,l}> = (I (x) X^k Z^l) |Phi_{0,0}>, |Phi_{0,0}> = sum_j |jj> / sqrt(d).
inline ComplexVector bell_vector(int d, WeylIndex idx) {
  const ComplexMatrix w = weyl_op(d, idx);
  ComplexVector phi = ComplexVector::Zero(d * d);
  for (int j = 0; j < d; ++j) {
    for (int b = 0; b < d; ++b) phi(j * d + b) = w(b, j);
  }
  return phi / std::sqrt(static_cast<double>(d));
}

/// Columns ordered by k * d + l.
class BellBasis {
 public:
  explicit BellBasis(int d) : d_(d) {
    require_prime(d);
    ComplexMatrix v(d * d, d * d);
    for (int k = 0; k < d; ++k) {
      for (int l = 0; l < d; ++l) v.col(k * d + l) = bell_vector(d, {k, l});
    }
    basis_ = OrthonormalBasis(std::move(v));
  }

  int d() const { return d_; }
  const ComplexMatrix& matrix() const { return basis_.matrix(); }
  ComplexVector state(WeylIndex idx) const { return basis_.vector(idx.k * d_ + idx.l); }

  /// rho expressed in this basis.
  ComplexMatrix coefficients(const ComplexMatrix& rho) const {
    return basis_.matrix().adjoint() * rho * basis_.matrix();
  }

 private:
  int d_;
  OrthonormalBasis basis_;
};

inline DensityMatrix bell_state(int d) { return pure_state(bell_vector(d, {0, 0})); }

/// Bell-basis weights of the isotropic state with Z error rate q; indexed
/// [k][l]. Valid for q up to d/(d+1), where the (0,0) weight reaches zero.
inline RealMatrix isotropic_spectrum(int d, double qber) {
  require_prime(d);
  const double p = qber * d / (d - 1);
  if (!(qber >= 0.0) || 1.0 - p + p / (d * d) < -1e-15) {
    throw InvalidInput("isotropic_spectrum: qber out of range");
  }
  RealMatrix lam = RealMatrix::Constant(d, d, p / (d * d));
  lam(0, 0) += 1.0 - p;
  return lam;
}

/// (1-p) |Phi00><Phi00| + p I / d^2 with p = q d / (d-1).
inline DensityMatrix isotropic_state(int d, double qber) {
  require_prime(d);
  const double q_max = (d - 1.0) / d;
  if (!(qber >= 0.0 && qber < q_max)) {
    throw InvalidInput("isotropic_state: qber must lie in [0, (d-1)/d)");
  }
  const double p = qber * d / (d - 1);
  const ComplexVector phi = bell_vector(d, {0, 0});
  const ComplexMatrix m = (1.0 - p) * (phi * phi.adjoint()) +
                          p * ComplexMatrix::Identity(d * d, d * d) / static_cast<double>(d * d);
  return DensityMatrix(m);
}

/// Pr(a != b) for Z measurements on both sides. |Phi00> gives a = b, so the
/// Bell state has zero error for every d.
inline double qber(const DensityMatrix& rho) {
  const int d = bipartite_dim(rho);
  double q = 0.0;
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      if (a != b) q += rho.matrix()(a * d + b, a * d + b).real();
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// Channels

inline ComplexMatrix z_phase_unitary(const std::vector<double>& phases) {
  const auto d = static_cast<Eigen::Index>(phases.size());
  ComplexMatrix u = ComplexMatrix::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) u(j, j) = std::polar(1.0, phases[static_cast<std::size_t>(j)]);
  return u;
}

/// Uniform double in [0,1) from the top 53 bits; fixed across standard libraries.
inline double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Diagonal unitary with phases drawn from the seed.
inline ComplexMatrix z_commuting_unitary(int d, std::uint64_t seed) {
  require_prime(d);
  std::mt19937_64 gen(seed);
  std::vector<double> phases(static_cast<std::size_t>(d));
  for (auto& p : phases) p = 2.0 * kPi * unit_uniform(gen);
  return z_phase_unitary(phases);
}

inline bool commutes_with_z(const ComplexMatrix& u, double tol = 1e-12) {
  const ComplexMatrix z = weyl_z(static_cast<int>(u.rows()));
  return max_abs_diff(u * z, z * u) <= tol;
}

/// (U (x) V) rho (U (x) V)^dagger for frame rotations commuting with Z.
inline DensityMatrix apply_misalignment(const DensityMatrix& rho, const ComplexMatrix& u_a,
                                        const ComplexMatrix& v_b) {
  const int d = bipartite_dim(rho);
  detail::require(u_a.rows() == d && v_b.rows() == d, "apply_misalignment: dimension mismatch");
  detail::require(is_unitary(u_a) && is_unitary(v_b), "apply_misalignment: frames must be unitary");
  detail::require(commutes_with_z(u_a) && commutes_with_z(v_b),
                  "apply_misalignment: frame rotations must commute with Z");
  const ComplexMatrix w = kron(u_a, v_b);
  const ComplexMatrix out = w * rho.matrix() * w.adjoint();
  return DensityMatrix(0.5 * (out + out.adjoint()));
}

/// Rotates Bob's qubit by theta about X, tilting his Z axis.
inline DensityMatrix apply_z_tilt(const DensityMatrix& rho, double theta) {
  if (rho.local_dim() != 2) throw Unsupported("apply_z_tilt is defined for qubits only");
  ComplexMatrix r(2, 2);
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  r << c, Complex(0, -s), Complex(0, -s), c;
  const ComplexMatrix w = kron(ComplexMatrix::Identity(2, 2), r);
  const ComplexMatrix out = w * rho.matrix() * w.adjoint();
  return DensityMatrix(0.5 * (out + out.adjoint()));
}

// ---------------------------------------------------------------------------
// Measurement statistics

/// Joint outcome distribution p(a, b | A (x) B) for one pair of settings.
struct MeasurementStats {
  int d = 2;
  MubSetting setting_a;
  MubSetting setting_b;
  RealMatrix probs;  // probs(a, b)

  void validate() const {
    require_prime(d);
    detail::require(setting_a.d == d && setting_b.d == d, "MeasurementStats: setting dimension mismatch");
    detail::require(probs.rows() == d && probs.cols() == d, "MeasurementStats: table must be d x d");
    detail::require(probs.minCoeff() >= 0.0, "MeasurementStats: negative probability");
    detail::require(std::abs(probs.sum() - 1.0) <= tol::kEntry, "MeasurementStats: probabilities must sum to 1");
  }
};

/// Exact probabilities <e_a (x) f_b| rho |e_a (x) f_b>.
inline RealMatrix measure_joint(const DensityMatrix& rho, const OrthonormalBasis& basis_a,
                                const OrthonormalBasis& basis_b) {
  const int d = rho.local_dim();
  if (basis_a.dim() != d || basis_b.dim() != d) throw InvalidInput("measure_joint: dimension mismatch");
  RealMatrix p(d, d);
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      const ComplexVector v = kron(ComplexVector(basis_a.vector(a)), ComplexVector(basis_b.vector(b)));
      p(a, b) = std::max(0.0, v.dot(rho.matrix() * v).real());
    }
  }
  return p / p.sum();
}

inline MeasurementStats measure_joint(const DensityMatrix& rho, const MubBasis& basis_a,
                                      const MubBasis& basis_b) {
  MeasurementStats s{rho.local_dim(), basis_a.setting, basis_b.setting,
                     measure_joint(rho, basis_a.basis, basis_b.basis)};
  s.validate();
  return s;
}

/// Exact statistics for every ordered pair of settings, in canonical order.
inline std::vector<MeasurementStats> measure_all_settings(const DensityMatrix& rho) {
  const int d = bipartite_dim(rho);
  const auto bases = mub_eigenbases(d);
  std::vector<MeasurementStats> out;
  out.reserve(bases.size() * bases.size());
  for (const auto& a : bases) {
    for (const auto& b : bases) out.push_back(measure_joint(rho, a, b));
  }
  return out;
}

/// Empirical frequencies of `shots` multinomial draws, as a chain of
/// conditional binomials over the d^2 cells.
inline MeasurementStats sample_stats(const MeasurementStats& stats, std::uint64_t shots, std::uint64_t seed) {
  stats.validate();
  if (shots == 0) throw InvalidInput("sample_stats: shots must be positive");
  std::mt19937_64 gen(seed);
  const int d = stats.d;
  MeasurementStats out = stats;
  std::uint64_t remaining = shots;
  double mass_left = 1.0;
  for (int i = 0; i < d * d; ++i) {
    const double p = stats.probs(i / d, i % d);
    std::uint64_t count = 0;
    if (i == d * d - 1) {
      count = remaining;
    } else if (remaining > 0 && p > 0.0) {
      const double cond = std::clamp(p / mass_left, 0.0, 1.0);
      std::binomial_distribution<std::uint64_t> draw(remaining, cond);
      count = draw(gen);
    }
    out.probs(i / d, i % d) = static_cast<double>(count) / static_cast<double>(shots);
    remaining -= count;
    mass_left -= p;
  }
  return out;
}

inline double total_variation(const MeasurementStats& a, const MeasurementStats& b) {
  return 0.5 * (a.probs - b.probs).cwiseAbs().sum();
}

inline nlohmann::json to_json(const MeasurementStats& s) {
  nlohmann::json probs = nlohmann::json::array();
  for (int a = 0; a < s.d; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (int b = 0; b < s.d; ++b) row.push_back(s.probs(a, b));
    probs.push_back(std::move(row));
  }
  return {{"d", s.d}, {"setting_a", s.setting_a.label()}, {"setting_b", s.setting_b.label()}, {"probs", probs}};
}

inline MeasurementStats stats_from_json(const nlohmann::json& j) {
  try {
    MeasurementStats s;
    s.d = j.at("d").get<int>();
    require_prime(s.d);
    s.setting_a = MubSetting::from_label(s.d, j.at("setting_a").get<std::string>());
    s.setting_b = MubSetting::from_label(s.d, j.at("setting_b").get<std::string>());
    const auto& rows = j.at("probs");
    detail::require(rows.is_array() && static_cast<int>(rows.size()) == s.d, "probs must have d rows");
    s.probs.resize(s.d, s.d);
    for (int a = 0; a < s.d; ++a) {
      detail::require(rows[a].is_array() && static_cast<int>(rows[a].size()) == s.d, "probs rows must have d entries");
      for (int b = 0; b < s.d; ++b) s.probs(a, b) = rows[a][b].get<double>();
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed MeasurementStats JSON: ") + e.what());
  }
}

}  // namespace rfiqkd
