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


#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "rfiqkd/linalg.hpp"
#include "rfiqkd/qudit.hpp"
#include "test_util.hpp"

namespace rfiqkd {
namespace {

constexpr int kPrimes[] = {2, 3, 5, 7};

ComplexMatrix diag(std::initializer_list<Complex> v) {
  ComplexVector d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const auto& x : v) d(i++) = x;
  return d.asDiagonal();
}

TEST(WeylZ, QubitIsPauliZ) { EXPECT_LE(max_abs_diff(weyl_z(2), diag({1.0, -1.0})), 1e-15); }

TEST(WeylZ, QutritPhases) {
  const Complex w = std::polar(1.0, 2 * kPi / 3);
  EXPECT_LE(max_abs_diff(weyl_z(3), diag({1.0, w, w * w})), 1e-15);
  EXPECT_LE(max_abs_diff(matrix_power(weyl_z(3), 3), ComplexMatrix::Identity(3, 3)), 1e-14);
}

TEST(WeylX, QubitIsPauliX) {
  ComplexMatrix x(2, 2);
  x << 0, 1, 1, 0;
  EXPECT_EQ(weyl_x(2), x);
}

TEST(WeylX, QutritShift) {
  const ComplexMatrix x = weyl_x(3);
  for (int j = 0; j < 3; ++j) {
    ComplexVector e = ComplexVector::Zero(3);
    e(j) = 1.0;
    const ComplexVector out = x * e;
    EXPECT_EQ(out((j + 1) % 3), Complex(1.0));
    EXPECT_NEAR(out.norm(), 1.0, 1e-15);
  }
}

TEST(WeylX, CommutationPhase) {
  for (int d : kPrimes) {
    const Complex w = std::polar(1.0, 2 * kPi / d);
    // X Z |j> = w^j |j+1> and Z X |j> = w^{j+1} |j+1>.
    EXPECT_LE(max_abs_diff(weyl_z(d) * weyl_x(d), w * weyl_x(d) * weyl_z(d)), 1e-12) << d;
  }
}

TEST(WeylOp, QubitXZ) {
  ComplexMatrix expected(2, 2);
  expected << 0, -1, 1, 0;
  EXPECT_LE(max_abs_diff(weyl_op(2, {1, 1}), expected), 1e-15);
  EXPECT_LE(max_abs_diff(weyl_op(2, {1, 1}), weyl_x(2) * weyl_z(2)), 1e-15);
}

TEST(WeylOp, IdentityIndex) { EXPECT_LE(max_abs_diff(weyl_op(3, {0, 0}), ComplexMatrix::Identity(3, 3)), 0.0); }

TEST(WeylOp, FifthPowerIsScalar) {
  const ComplexMatrix p = matrix_power(weyl_op(5, {2, 3}), 5);
  EXPECT_TRUE(is_unitary(weyl_op(5, {2, 3})));
  EXPECT_LE(max_abs_diff(p, p(0, 0) * ComplexMatrix::Identity(5, 5)), 1e-12);
  EXPECT_NEAR(std::abs(p(0, 0)), 1.0, 1e-12);
}

TEST(WeylOp, MatchesMatrixProduct) {
  for (int d : kPrimes) {
    for (int k = 0; k < d; ++k) {
      for (int l = 0; l < d; ++l) {
        const ComplexMatrix direct = matrix_power(weyl_x(d), k) * matrix_power(weyl_z(d), l);
        EXPECT_LE(max_abs_diff(weyl_op(d, {k, l}), direct), 1e-12);
      }
    }
  }
}

TEST(WeylOp, RejectsNonPrime) {
  EXPECT_THROW(weyl_op(4, {1, 0}), InvalidInput);
  EXPECT_THROW(weyl_z(1), InvalidInput);
}

TEST(WeylIndex, Reduction) {
  EXPECT_EQ(WeylIndex::reduced(7, -1, 5), (WeylIndex{2, 4}));
}

TEST(HsInner, Examples) {
  EXPECT_NEAR(std::abs(hs_inner(weyl_op(3, {1, 1}), weyl_op(3, {1, 1})) - Complex(3.0)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(hs_inner(weyl_op(3, {1, 0}), weyl_op(3, {2, 0}))), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(hs_inner(ComplexMatrix::Identity(4, 4), ComplexMatrix::Identity(4, 4)) - Complex(4.0)), 0.0,
              1e-15);
}

TEST(HsInner, IsTraceOfAdjointProduct) {
  std::mt19937_64 g(11);
  const ComplexMatrix a = testing::random_hermitian(4, g) + Complex(0, 1) * testing::random_hermitian(4, g);
  const ComplexMatrix b = testing::random_hermitian(4, g);
  EXPECT_NEAR(std::abs(hs_inner(a, b) - (a.adjoint() * b).trace()), 0.0, 1e-12);
}

TEST(WeylProperties, Orthogonality) {
  for (int d : kPrimes) {
    for (int i = 0; i < d * d; ++i) {
      for (int j = 0; j < d * d; ++j) {
        const Complex v = hs_inner(weyl_op(d, {i / d, i % d}), weyl_op(d, {j / d, j % d}));
        EXPECT_LE(std::abs(v - Complex(i == j ? d : 0.0)), 1e-10) << d << " " << i << " " << j;
      }
    }
  }
}

TEST(WeylProperties, Unitary) {
  for (int d : kPrimes)
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l) EXPECT_TRUE(is_unitary(weyl_op(d, {k, l})));
}

TEST(WeylProperties, BasisExpansionPurity) {
  std::mt19937_64 g(5);
  for (int d : kPrimes) {
    for (int trial = 0; trial < 10; ++trial) {
      const ComplexMatrix rho = testing::random_state(d, g).matrix();
      double s = 0.0;
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) s += std::norm(hs_inner(rho, weyl_op(d, {k, l})));
      EXPECT_NEAR(s / d, (rho * rho).trace().real(), 1e-9);
    }
  }
}

TEST(Mub, Counts) {
  EXPECT_EQ(mub_eigenbases(2).size(), 3u);
  EXPECT_EQ(mub_eigenbases(3).size(), 4u);
  EXPECT_EQ(mub_eigenbases(5).size(), 6u);
  EXPECT_THROW(mub_eigenbases(6), InvalidInput);
}

TEST(Mub, QubitBasesArePauliEigenbases) {
  const auto bases = mub_eigenbases(2);
  ComplexMatrix y(2, 2);
  y << 0, Complex(0, -1), Complex(0, 1), 0;
  const ComplexMatrix paulis[] = {weyl_z(2), weyl_x(2), y};
  for (int i = 0; i < 3; ++i) {
    for (int a = 0; a < 2; ++a) {
      const ComplexVector v = bases[static_cast<std::size_t>(i)].basis.vector(a);
      const ComplexVector pv = paulis[i] * v;
      EXPECT_NEAR(std::abs(std::abs(v.dot(pv)) - 1.0), 0.0, 1e-12);
    }
  }
}

TEST(Mub, MutualUnbiasedness) {
  for (int d : kPrimes) {
    const auto bases = mub_eigenbases(d);
    for (std::size_t i = 0; i < bases.size(); ++i) {
      for (std::size_t j = 0; j < bases.size(); ++j) {
        const ComplexMatrix overlap = bases[i].basis.matrix().adjoint() * bases[j].basis.matrix();
        for (int a = 0; a < d; ++a) {
          for (int b = 0; b < d; ++b) {
            const double expected = i == j ? (a == b ? 1.0 : 0.0) : 1.0 / d;
            EXPECT_NEAR(std::norm(overlap(a, b)), expected, 1e-10) << d << " " << i << " " << j;
          }
        }
      }
    }
  }
}

TEST(Mub, EigenvalueLabels) {
  for (int d : kPrimes) {
    for (const auto& basis : mub_eigenbases(d)) {
      const ComplexMatrix op = basis.setting.is_z() ? weyl_z(d) : weyl_op(d, {1, basis.setting.slope});
      const Complex c = basis.setting.is_z() ? Complex(1.0) : xz_spectrum_phase(d, basis.setting.slope);
      for (int a = 0; a < d; ++a) {
        const ComplexVector v = basis.basis.vector(a);
        const Complex lambda = c * root_of_unity(d, a);
        EXPECT_LE((op * v - lambda * v).norm(), 1e-10);
        EXPECT_NEAR(std::abs(basis.eigenvalues[static_cast<std::size_t>(a)] - lambda), 0.0, 1e-12);
        // First component real and positive.
        const Eigen::Index first = basis.setting.is_z() ? a : 0;
        EXPECT_NEAR(v(first).imag(), 0.0, 1e-12);
        EXPECT_GT(v(first).real(), 0.0);
      }
    }
  }
}

TEST(Mub, SettingForDiagonalizesEveryWeylOperator) {
  for (int d : kPrimes) {
    const auto bases = mub_eigenbases(d);
    for (int k = 0; k < d; ++k) {
      for (int l = 0; l < d; ++l) {
        const auto s = setting_for(d, {k, l});
        const auto& basis = bases[static_cast<std::size_t>(s.index())];
        const auto w = outcome_weights(basis, {k, l});
        const ComplexMatrix u = basis.basis.matrix();
        ComplexVector wd(d);
        for (int a = 0; a < d; ++a) wd(a) = w[static_cast<std::size_t>(a)];
        EXPECT_LE(max_abs_diff(u * wd.asDiagonal() * u.adjoint(), weyl_op(d, {k, l})), 1e-10);
      }
    }
  }
}

TEST(Mub, LabelsRoundTrip) {
  for (int i = 0; i <= 5; ++i) {
    const auto s = MubSetting::from_index(5, i);
    EXPECT_EQ(MubSetting::from_label(5, s.label()), s);
  }
  EXPECT_EQ(MubSetting::from_index(3, 0).label(), "Z");
  EXPECT_EQ(MubSetting::from_index(3, 2).label(), "XZ1");
  EXPECT_THROW(MubSetting::from_label(3, "XZ3"), InvalidInput);
  EXPECT_THROW(MubSetting::from_label(3, "Y"), InvalidInput);
}

TEST(EigHermitian, Diagonal) {
  const auto e = eig_hermitian(diag({0.3, 0.7}));
  ASSERT_EQ(e.values.size(), 2u);
  EXPECT_NEAR(e.values[0], 0.7, 1e-15);
  EXPECT_NEAR(e.values[1], 0.3, 1e-15);
}

TEST(EigHermitian, PauliX) {
  const auto e = eig_hermitian(weyl_x(2));
  EXPECT_NEAR(e.values[0], 1.0, 1e-15);
  EXPECT_NEAR(e.values[1], -1.0, 1e-15);
  const ComplexVector plus = e.vectors.vector(0);
  EXPECT_NEAR(std::abs(plus(0)), 1 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(std::abs(plus(0) - plus(1)), 0.0, 1e-12);
  const ComplexVector minus = e.vectors.vector(1);
  EXPECT_NEAR(std::abs(minus(0) + minus(1)), 0.0, 1e-12);
}

TEST(EigHermitian, RandomRoundTrip) {
  std::mt19937_64 g(9);
  for (int t = 0; t < 20; ++t) {
    const ComplexMatrix a = testing::random_hermitian(9, g);
    const auto e = eig_hermitian(a);
    EXPECT_LT((reconstruct(e) - a).norm(), 1e-8);
    EXPECT_TRUE(std::is_sorted(e.values.rbegin(), e.values.rend()));
  }
}

TEST(EigHermitian, RejectsNonHermitian) { EXPECT_THROW(eig_hermitian(weyl_z(3)), InvalidInput); }

TEST(OrthonormalBasis, RejectsNonOrthonormal) {
  ComplexMatrix m(2, 2);
  m << 1, 1, 0, 1;
  EXPECT_THROW(OrthonormalBasis{m}, InvalidInput);
}

TEST(Primes, Helpers) {
  EXPECT_TRUE(is_prime(2));
  EXPECT_TRUE(is_prime(31));
  EXPECT_FALSE(is_prime(1));
  EXPECT_FALSE(is_prime(9));
  EXPECT_EQ(mod_inverse(3, 7), 5);
  EXPECT_EQ(mod(-3, 5), 2);
}

}  // namespace
}  // namespace rfiqkd
