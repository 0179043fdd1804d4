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
#include <random>
#include <string>

#include "rfiqkd/tomography.hpp"
#include "test_util.hpp"

namespace rfiqkd {
namespace {

RealMatrix random_bell_weights(int d, std::mt19937_64& g) {
  std::exponential_distribution<double> e(1.0);
  RealMatrix lam(d, d);
  for (int i = 0; i < d * d; ++i) lam(i / d, i % d) = e(g);
  return lam / lam.sum();
}

DensityMatrix bell_diagonal_state(const RealMatrix& lam) {
  const int d = static_cast<int>(lam.rows());
  ComplexMatrix m = ComplexMatrix::Zero(d * d, d * d);
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l) m += lam(k, l) * testing::projector(bell_vector(d, {k, l}));
  return DensityMatrix(0.5 * (m + m.adjoint()));
}

CorrelatorTable table_from_state(const DensityMatrix& rho) {
  return correlators_from_stats(TomographyInput(measure_all_settings(rho)));
}

TEST(TomographyInput, ReportsMissingPairs) {
  auto stats = measure_all_settings(bell_state(2));
  stats.erase(stats.begin() + 4);  // XZ0/XZ0
  try {
    TomographyInput input(stats);
    FAIL() << "expected IncompleteInput";
  } catch (const IncompleteInput& e) {
    EXPECT_NE(std::string(e.what()).find("XZ0/XZ0"), std::string::npos) << e.what();
  }
  EXPECT_THROW(TomographyInput(std::vector<MeasurementStats>{}), IncompleteInput);
}

TEST(TomographyInput, RejectsDuplicatesAndMixedDimensions) {
  auto stats = measure_all_settings(bell_state(2));
  stats.push_back(stats.front());
  EXPECT_THROW(TomographyInput{stats}, InvalidInput);
  auto mixed = measure_all_settings(bell_state(2));
  mixed.back() = measure_all_settings(bell_state(3)).back();
  EXPECT_THROW(TomographyInput{mixed}, InvalidInput);
}

TEST(CorrelatorsFromStats, BellQubit) {
  const auto t = table_from_state(bell_state(2));
  const Complex i(0, 1);
  EXPECT_NEAR(std::abs(t.at({1, 0}, {1, 0}) - Complex(1.0)), 0.0, 1e-14);         // X X
  EXPECT_NEAR(std::abs(i * i * t.at({1, 1}, {1, 1}) - Complex(-1.0)), 0.0, 1e-14);  // Y Y, Y = i X Z
  EXPECT_NEAR(std::abs(t.at({0, 1}, {0, 1}) - Complex(1.0)), 0.0, 1e-14);         // Z Z
}

TEST(CorrelatorsFromStats, MaximallyMixed) {
  const auto t = table_from_state(maximally_mixed(9));
  for (std::size_t i = 1; i < t.values().size(); ++i) EXPECT_LE(std::abs(t.values()[i]), 1e-14);
}

TEST(CorrelatorsFromStats, AgreeWithStateCorrelators) {
  std::mt19937_64 g(31);
  for (int d : {2, 3, 5}) {
    for (int t = 0; t < 50; ++t) {
      const auto rho = testing::random_state(d * d, g);
      EXPECT_LT(table_from_state(rho).max_abs_diff(correlators_from_state(rho)), 1e-10);
    }
  }
}

TEST(Reconstruct, Examples) {
  EXPECT_LT((reconstruct_state(table_from_state(bell_state(3))).state.matrix() - bell_state(3).matrix()).norm(), 1e-9);
  const auto mixed = reconstruct_state(table_from_state(maximally_mixed(9)));
  EXPECT_LT((mixed.state.matrix() - ComplexMatrix::Identity(9, 9) / 9.0).norm(), 1e-12);
  EXPECT_TRUE(mixed.reliable);
}

TEST(Reconstruct, RoundTripRandomStates) {
  std::mt19937_64 g(47);
  for (int d : {2, 3, 5}) {
    for (int t = 0; t < 50; ++t) {
      const auto rho = testing::random_state(d * d, g);
      const auto rec = reconstruct_state(table_from_state(rho));
      EXPECT_LT((rec.state.matrix() - rho.matrix()).norm(), 1e-8);
      EXPECT_LT(rec.repair_distance, 1e-9);
    }
  }
}

TEST(Reconstruct, PrintedExpansionWithoutAdjointIsNotHermitian) {
  // Coefficients <W> instead of conj(<W>) break Hermiticity for d > 2.
  std::mt19937_64 g(1);
  const auto rho = testing::random_state(9, g);
  const auto t = correlators_from_state(rho);
  ComplexMatrix naive = ComplexMatrix::Zero(9, 9);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      const WeylIndex a{i / 3, i % 3}, b{j / 3, j % 3};
      naive += t.at(a, b) * kron(weyl_op(3, a), weyl_op(3, b));
    }
  naive /= 9.0;
  EXPECT_GT(max_abs_diff(naive, naive.adjoint()), 1e-3);
  EXPECT_LT((expand_in_weyl_basis(t) - rho.matrix()).norm(), 1e-10);
}

TEST(Reconstruct, SampledStatisticsAreRepaired) {
  const auto truth = isotropic_state(2, 0.01);
  const auto exact = measure_all_settings(truth);
  int close = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<MeasurementStats> sampled;
    for (std::size_t i = 0; i < exact.size(); ++i) sampled.push_back(sample_stats(exact[i], 1000000, seed * 100 + i));
    const auto rec = reconstruct_state(correlators_from_stats(TomographyInput(sampled)));
    const auto e = eig_hermitian(rec.state.matrix());
    EXPECT_GE(e.values.back(), -1e-9);
    EXPECT_NEAR(rec.state.matrix().trace().real(), 1.0, 1e-10);
    if (trace_distance(rec.state.matrix(), truth.matrix()) < 0.01) ++close;
  }
  EXPECT_GE(close, 95);
}

TEST(Reconstruct, FlagsLargeRepair) {
  CorrelatorTable t(2);
  t.at({0, 0}, {0, 0}) = 1.0;
  t.at({0, 1}, {0, 1}) = 1.0;
  t.at({1, 0}, {1, 0}) = 1.0;
  t.at({1, 1}, {1, 1}) = -1.0;  // <Y Y> = +1 alongside <X X> = <Z Z> = +1 is unphysical
  const auto rec = reconstruct_state(t);
  EXPECT_FALSE(rec.reliable);
  EXPECT_GT(rec.repair_distance, 0.1);
}

TEST(Spectrum, IsotropicQubit) {
  const auto r = extract_spectrum(isotropic_state(2, 0.01));
  ASSERT_EQ(r.lambda.size(), 4u);
  EXPECT_NEAR(r.lambda[0], 0.985, 1e-12);
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(r.lambda[static_cast<std::size_t>(i)], 0.005, 1e-12);
  EXPECT_LT(r.residual, 1e-10);
  ASSERT_TRUE(r.labeled());
  EXPECT_NEAR((*r.bell_lambda)(0, 0), 0.985, 1e-12);
}

TEST(Spectrum, BellStates) {
  for (int d : {2, 3, 5}) {
    const auto r = extract_spectrum(bell_state(d));
    EXPECT_NEAR(r.lambda[0], 1.0, 1e-12);
    for (std::size_t i = 1; i < r.lambda.size(); ++i) EXPECT_NEAR(r.lambda[i], 0.0, 1e-12);
    const auto e = z_error_distribution(r);
    EXPECT_NEAR(e[0], 1.0, 1e-12);
  }
}

TEST(Spectrum, MisalignedIsotropicIsRealigned) {
  std::mt19937_64 g(3);
  for (int d : {2, 3, 5}) {
    const auto rho = isotropic_state(d, 0.02);
    const auto turned = apply_misalignment(rho, testing::random_z_frame(d, g), testing::random_z_frame(d, g));
    const auto a = extract_spectrum(rho), b = extract_spectrum(turned);
    for (std::size_t i = 0; i < a.lambda.size(); ++i) EXPECT_NEAR(a.lambda[i], b.lambda[i], 1e-9);
    ASSERT_TRUE(b.labeled()) << d << " residual " << b.residual;
    EXPECT_LT((*b.bell_lambda - isotropic_spectrum(d, 0.02)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Spectrum, MisalignedBellDiagonalLabels) {
  std::mt19937_64 g(12);
  for (int d : {2, 3}) {
    for (int t = 0; t < 5; ++t) {
      const RealMatrix lam = random_bell_weights(d, g);
      const auto rho = apply_misalignment(bell_diagonal_state(lam), testing::random_z_frame(d, g),
                                          testing::random_z_frame(d, g));
      const auto r = extract_spectrum(rho);
      ASSERT_TRUE(r.labeled()) << d << " residual " << r.residual;
      // Labels are recovered up to the Z-preserving relabelling l -> l + const per k.
      const auto e = z_error_distribution(r);
      const auto truth = z_error_distribution(lam);
      for (int k = 0; k < d; ++k) EXPECT_NEAR(e[static_cast<std::size_t>(k)], truth[static_cast<std::size_t>(k)], 1e-8);
      EXPECT_NEAR(qber(rho), 1.0 - e[0], 1e-9);
    }
  }
}

TEST(Spectrum, FrameIndependenceOfEigenvalues) {
  std::mt19937_64 g(19);
  for (int d : {2, 3}) {
    for (int t = 0; t < 5; ++t) {
      const auto rho = testing::random_state(d * d, g);
      const auto turned = apply_misalignment(rho, testing::random_z_frame(d, g), testing::random_z_frame(d, g));
      const auto a = extract_spectrum(rho), b = extract_spectrum(turned);
      for (std::size_t i = 0; i < a.lambda.size(); ++i) EXPECT_NEAR(a.lambda[i], b.lambda[i], 1e-9);
    }
  }
}

TEST(Spectrum, ProductStateIsUnlabeled) {
  ComplexVector v = ComplexVector::Zero(4);
  v(0) = 1.0;
  const auto r = extract_spectrum(pure_state(v));
  EXPECT_GT(r.residual, 1e-3);
  EXPECT_FALSE(r.labeled());
  EXPECT_THROW(z_error_distribution(r), InvalidInput);
}

TEST(ZErrors, Examples) {
  const auto e2 = z_error_distribution(isotropic_spectrum(2, 0.01));
  EXPECT_NEAR(e2[0], 0.99, 1e-15);
  EXPECT_NEAR(e2[1], 0.01, 1e-15);
  const auto e3 = z_error_distribution(*extract_spectrum(isotropic_state(3, 0.01)).bell_lambda);
  EXPECT_NEAR(e3[0], 0.99, 1e-10);
  EXPECT_NEAR(e3[1], 0.005, 1e-10);
  EXPECT_NEAR(e3[2], 0.005, 1e-10);
}

TEST(ZErrors, QberOfBellDiagonalStates) {
  std::mt19937_64 g(23);
  for (int d : {2, 3, 5}) {
    const RealMatrix lam = random_bell_weights(d, g);
    EXPECT_NEAR(qber(bell_diagonal_state(lam)), 1.0 - z_error_distribution(lam)[0], 1e-9);
  }
}

TEST(SpectrumJson, RoundTrip) {
  const auto r = extract_spectrum(isotropic_state(3, 0.05));
  const auto back = spectrum_from_json(to_json(r));
  EXPECT_EQ(back.d, 3);
  EXPECT_EQ(back.lambda, r.lambda);
  ASSERT_TRUE(back.labeled());
  EXPECT_EQ(*back.bell_lambda, *r.bell_lambda);
  EXPECT_THROW(spectrum_from_json(nlohmann::json{{"lambda", {0.5, 0.5}}, {"residual", 0.0}}), InvalidInput);
}

}  // namespace
}  // namespace rfiqkd
