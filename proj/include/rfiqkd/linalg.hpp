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

// Dense complex linear algebra on small matrices. Everything here is a thin
// layer over Eigen; the point is a single set of tolerances and checks.

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <numeric>
#include <vector>

#include "rfiqkd/errors.hpp"

namespace rfiqkd {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

namespace tol {
inline constexpr double kEntry = 1e-10;           // Hermiticity / unitarity
inline constexpr double kReconstruction = 1e-8;   // Frobenius residuals
inline constexpr double kPsd = 1e-9;              // smallest allowed eigenvalue
}  // namespace tol

inline constexpr double kPi = 3.14159265358979323846;

/// Largest absolute entry of A - B.
inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidInput("max_abs_diff: shape mismatch");
  }
  return a.rows() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

inline bool is_square(const ComplexMatrix& a) { return a.rows() == a.cols() && a.rows() > 0; }

inline bool is_hermitian(const ComplexMatrix& a, double tol = tol::kEntry) {
  return is_square(a) && max_abs_diff(a, a.adjoint()) <= tol;
}

inline bool is_unitary(const ComplexMatrix& u, double tol = tol::kEntry) {
  return is_square(u) &&
         max_abs_diff(u.adjoint() * u, ComplexMatrix::Identity(u.rows(), u.cols())) <= tol;
}

/// Hilbert-Schmidt inner product Tr(A^dagger B).
inline Complex hs_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (!is_square(a) || a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidInput("hs_inner: dimension mismatch");
  }
  // Tr(A^dagger B) = sum_ij conj(A_ij) B_ij
  return a.conjugate().cwiseProduct(b).sum();
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline ComplexVector kron(const ComplexVector& a, const ComplexVector& b) {
  ComplexVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

/// Integer matrix power by repeated squaring.
inline ComplexMatrix matrix_power(const ComplexMatrix& a, unsigned exponent) {
  ComplexMatrix result = ComplexMatrix::Identity(a.rows(), a.cols());
  ComplexMatrix base = a;
  while (exponent > 0) {
    if (exponent & 1u) result = result * base;
    base = base * base;
    exponent >>= 1u;
  }
  return result;
}

/// Columns are orthonormal vectors of equal dimension. Column i is basis vector i.
class OrthonormalBasis {
 public:
  OrthonormalBasis() = default;

  explicit OrthonormalBasis(ComplexMatrix vectors, double tol = tol::kEntry)
      : vectors_(std::move(vectors)) {
    if (!is_square(vectors_)) throw InvalidInput("OrthonormalBasis: need dim vectors of length dim");
    if (!is_unitary(vectors_, tol)) throw InvalidInput("OrthonormalBasis: vectors not orthonormal");
  }

  Eigen::Index dim() const { return vectors_.rows(); }
  ComplexVector vector(Eigen::Index i) const { return vectors_.col(i); }
  const ComplexMatrix& matrix() const { return vectors_; }

 private:
  ComplexMatrix vectors_;
};

struct HermitianEigen {
  std::vector<double> values;  // descending
  OrthonormalBasis vectors;    // column i pairs with values[i]
};

/// Spectral decomposition of a Hermitian matrix, eigenvalues sorted descending.
inline HermitianEigen eig_hermitian(const ComplexMatrix& a, double tol = tol::kEntry) {
  if (!is_hermitian(a, tol)) throw InvalidInput("eig_hermitian: matrix is not Hermitian");
  const ComplexMatrix sym = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym);
  if (solver.info() != Eigen::Success) throw InvalidInput("eig_hermitian: decomposition failed");
  const Eigen::Index n = a.rows();
  HermitianEigen out;
  out.values.resize(static_cast<std::size_t>(n));
  ComplexMatrix vecs(n, n);
  // Eigen returns ascending order.
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[static_cast<std::size_t>(i)] = solver.eigenvalues()(n - 1 - i);
    vecs.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  out.vectors = OrthonormalBasis(std::move(vecs), 1e-9);
  return out;
}

inline ComplexMatrix reconstruct(const HermitianEigen& e) {
  const ComplexMatrix& v = e.vectors.matrix();
  RealVector lam(static_cast<Eigen::Index>(e.values.size()));
  for (std::size_t i = 0; i < e.values.size(); ++i) lam(static_cast<Eigen::Index>(i)) = e.values[i];
  return v * lam.cast<Complex>().asDiagonal() * v.adjoint();
}

/// Trace norm distance (1/2)||A - B||_1 between Hermitian matrices.
inline double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  const auto e = eig_hermitian(a - b, 1e-8);
  double s = 0.0;
  for (double v : e.values) s += std::abs(v);
  return 0.5 * s;
}

}  // namespace rfiqkd
