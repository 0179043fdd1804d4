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

// State reconstruction from MUB statistics and Bell-diagonal spectrum
// extraction.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "rfiqkd/errors.hpp"
#include "rfiqkd/linalg.hpp"
#include "rfiqkd/optimize.hpp"
#include "rfiqkd/qudit.hpp"
#include "rfiqkd/states.hpp"
#include "rfiqkd/witness.hpp"

namespace rfiqkd {

/// Statistics for every ordered pair of the d+1 settings.
class TomographyInput {
 public:
  TomographyInput(int d, const std::vector<MeasurementStats>& stats) : d_(d) {
    require_prime(d);
    const int n = d + 1;
    table_.resize(static_cast<std::size_t>(n * n));
    for (const auto& s : stats) {
      s.validate();
      if (s.d != d) throw InvalidInput("TomographyInput: stats for d=" + std::to_string(s.d) + " in a d=" + std::to_string(d) + " input");
      auto& slot = table_[slot_index(s.setting_a, s.setting_b)];
      if (slot) throw InvalidInput("TomographyInput: duplicate setting pair " + pair_name(s.setting_a, s.setting_b));
      slot = s;
    }
    std::vector<std::string> missing;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (!table_[static_cast<std::size_t>(a * n + b)]) {
          missing.push_back(pair_name(MubSetting::from_index(d, a), MubSetting::from_index(d, b)));
        }
      }
    }
    if (!missing.empty()) {
      std::string msg = "TomographyInput: missing setting pairs:";
      for (const auto& m : missing) msg += " " + m;
      throw IncompleteInput(msg);
    }
  }

  explicit TomographyInput(const std::vector<MeasurementStats>& stats)
      : TomographyInput(stats.empty() ? throw IncompleteInput("TomographyInput: no statistics") : stats.front().d,
                        stats) {}

  int d() const { return d_; }

  const MeasurementStats& at(MubSetting a, MubSetting b) const { return *table_[slot_index(a, b)]; }

  static std::string pair_name(MubSetting a, MubSetting b) { return a.label() + "/" + b.label(); }

 private:
  std::size_t slot_index(MubSetting a, MubSetting b) const {
    return static_cast<std::size_t>(a.index() * (d_ + 1) + b.index());
  }

  int d_;
  std::vector<std::optional<MeasurementStats>> table_;
};

/// Each correlator is read off the setting pair whose eigenbases diagonalize
/// both Weyl operators, weighting outcome a by the operator's own eigenvalue
/// on eigenvector a.
inline CorrelatorTable correlators_from_stats(const TomographyInput& input) {
  const int d = input.d();
  const auto bases = mub_eigenbases(d);
  std::vector<MubSetting> setting(static_cast<std::size_t>(d * d));
  std::vector<std::vector<Complex>> weights(static_cast<std::size_t>(d * d));
  for (int k = 0; k < d; ++k) {
    for (int l = 0; l < d; ++l) {
      const auto i = static_cast<std::size_t>(k * d + l);
      setting[i] = setting_for(d, {k, l});
      weights[i] = outcome_weights(bases[static_cast<std::size_t>(setting[i].index())], {k, l});
    }
  }
  CorrelatorTable table(d);
  for (int ia = 0; ia < d * d; ++ia) {
    const auto& wa = weights[static_cast<std::size_t>(ia)];
    for (int ib = 0; ib < d * d; ++ib) {
      const auto& wb = weights[static_cast<std::size_t>(ib)];
      const RealMatrix& p = input.at(setting[static_cast<std::size_t>(ia)], setting[static_cast<std::size_t>(ib)]).probs;
      Complex sum{};
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) sum += wa[static_cast<std::size_t>(a)] * wb[static_cast<std::size_t>(b)] * p(a, b);
      }
      table.at({ia / d, ia % d}, {ib / d, ib % d}) = sum;
    }
  }
  return table;
}

/// rho = (1/d^2) sum <W^dagger> W over W = X^{k1} Z^{l1} (x) X^{k2} Z^{l2},
/// with <W^dagger> = conj(<W>). Each W is monomial, so the sum is assembled
/// entrywise.
inline ComplexMatrix expand_in_weyl_basis(const CorrelatorTable& table) {
  const int d = table.d();
  const int n = d * d;
  ComplexMatrix m = ComplexMatrix::Zero(n, n);
  for (int k1 = 0; k1 < d; ++k1)
    for (int l1 = 0; l1 < d; ++l1)
      for (int k2 = 0; k2 < d; ++k2)
        for (int l2 = 0; l2 < d; ++l2) {
          const Complex c = std::conj(table.at({k1, l1}, {k2, l2}));
          if (c == Complex{}) continue;
          for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
              const Complex phase = root_of_unity(d, static_cast<long long>(l1) * i + static_cast<long long>(l2) * j);
              m(mod(i + k1, d) * d + mod(j + k2, d), i * d + j) += c * phase;
            }
          }
        }
  return m / static_cast<double>(n);
}

struct Reconstruction {
  DensityMatrix state;
  double repair_distance = 0.0;  // trace distance between the raw expansion and `state`
  bool reliable = true;
};

/// Clip negative eigenvalues and renormalize the trace.
inline ComplexMatrix project_to_states(const ComplexMatrix& hermitian) {
  const ComplexMatrix h = 0.5 * (hermitian + hermitian.adjoint());
  auto e = eig_hermitian(h, 1e-8);
  double total = 0.0;
  for (double& v : e.values) {
    v = std::max(v, 0.0);
    total += v;
  }
  if (total <= 0.0) throw InvalidInput("project_to_states: no positive spectrum to keep");
  for (double& v : e.values) v /= total;
  const ComplexMatrix out = reconstruct(e);
  return 0.5 * (out + out.adjoint());
}

inline Reconstruction reconstruct_state(const CorrelatorTable& table, double unreliable_threshold = 0.1) {
  const ComplexMatrix raw = expand_in_weyl_basis(table);
  if (!is_hermitian(raw, 1e-8)) throw InvalidInput("reconstruct_state: correlators do not describe a Hermitian operator");
  const ComplexMatrix repaired = project_to_states(raw);
  const double distance = trace_distance(raw, repaired);
  return Reconstruction{DensityMatrix(repaired), distance, distance <= unreliable_threshold};
}

// ---------------------------------------------------------------------------
// Spectrum

struct SpectrumReport {
  int d = 2;
  std::vector<double> lambda;   // eigenvalues of rho, descending
  ComplexMatrix frame_a;        // rho_rotated = (frame_a (x) frame_b) rho (...)^dagger
  ComplexMatrix frame_b;
  double residual = 0.0;        // off-diagonal Frobenius norm of rho_rotated in the Bell basis
  std::optional<RealMatrix> bell_lambda;  // [k][l] Bell weights, set when residual is within tolerance

  bool labeled() const { return bell_lambda.has_value(); }
};

struct SpectrumOptions {
  double label_tolerance = 1e-6;
  int random_starts = 4;
};

namespace detail {

/// Sum of |<Phi_kl| D rho D^dagger |Phi_kl>|^2 for D = diag phases on |j j'>.
/// The Bell-basis off-diagonal weight is ||rho||_F^2 minus this.
inline double bell_diagonal_weight(const ComplexMatrix& rho, int d, const std::vector<double>& alice,
                                   const std::vector<double>& bob, RealMatrix* diag_out = nullptr) {
  double total = 0.0;
  for (int k = 0; k < d; ++k) {
    for (int l = 0; l < d; ++l) {
      Complex s{};
      for (int j = 0; j < d; ++j) {
        const int r = j * d + mod(j + k, d);
        const double pr = alice[static_cast<std::size_t>(j)] + bob[static_cast<std::size_t>(mod(j + k, d))];
        for (int jp = 0; jp < d; ++jp) {
          const int c = jp * d + mod(jp + k, d);
          const double pc = alice[static_cast<std::size_t>(jp)] + bob[static_cast<std::size_t>(mod(jp + k, d))];
          s += rho(r, c) * std::polar(1.0, pr - pc + 2.0 * kPi * mod(static_cast<long long>(l) * (jp - j), d) / d);
        }
      }
      s /= static_cast<double>(d);
      if (diag_out) (*diag_out)(k, l) = s.real();
      total += std::norm(s);
    }
  }
  return total;
}

}  // namespace detail

/// Eigenvalues plus a search over Z-commuting local phases that brings rho
/// closest to Bell-diagonal form. 2(d-1) free phases; the first phase on
/// each side is fixed.
inline SpectrumReport extract_spectrum(const DensityMatrix& rho, const SpectrumOptions& options = {}) {
  const int d = bipartite_dim(rho);
  const ComplexMatrix& m = rho.matrix();
  SpectrumReport report;
  report.d = d;
  report.lambda = eig_hermitian(m).values;

  const double frob2 = m.squaredNorm();
  auto unpack = [d](const std::vector<double>& x, std::vector<double>& a, std::vector<double>& b) {
    a.assign(static_cast<std::size_t>(d), 0.0);
    b.assign(static_cast<std::size_t>(d), 0.0);
    for (int j = 1; j < d; ++j) {
      a[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(j - 1)];
      b[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(d - 1 + j - 1)];
    }
  };
  std::vector<double> pa, pb;
  auto residual2 = [&](const std::vector<double>& x) {
    unpack(x, pa, pb);
    return std::max(0.0, frob2 - detail::bell_diagonal_weight(m, d, pa, pb));
  };

  std::vector<std::vector<double>> starts;
  starts.emplace_back(static_cast<std::size_t>(2 * (d - 1)), 0.0);
  {
    // Undo the phases of the |jj><00| coherences on Bob's side.
    std::vector<double> s(static_cast<std::size_t>(2 * (d - 1)), 0.0);
    for (int j = 1; j < d; ++j) {
      const Complex c = m(j * d + j, 0);
      if (std::abs(c) > 1e-14) s[static_cast<std::size_t>(d - 1 + j - 1)] = -std::arg(c);
    }
    starts.push_back(std::move(s));
  }
  std::mt19937_64 gen(0x5eed);
  for (int r = 0; r < options.random_starts; ++r) {
    std::vector<double> s(static_cast<std::size_t>(2 * (d - 1)));
    for (auto& v : s) v = 2.0 * kPi * unit_uniform(gen);
    starts.push_back(std::move(s));
  }

  opt::Minimum best;
  for (const auto& s : starts) {
    if (residual2(s) <= 1e-30) {
      best.x = s;
      best.value = 0.0;
      break;
    }
    opt::NelderMeadOptions o;
    o.initial_step = 0.3;
    o.x_tol = 1e-12;
    o.f_tol = 1e-30;
    o.max_evaluations = 4000 * d;
    auto found = opt::nelder_mead(residual2, s, o);
    if (found.value < best.value) best = std::move(found);
    if (best.value <= 1e-24) break;
  }

  unpack(best.x, pa, pb);
  RealMatrix diag(d, d);
  double weight = detail::bell_diagonal_weight(m, d, pa, pb, &diag);
  // Bob's Z^c shifts labels l -> l + c; pick the shift that puts the largest
  // k = 0 weight at l = 0.
  Eigen::Index top = 0;
  diag.row(0).maxCoeff(&top);
  if (top != 0) {
    for (int j = 0; j < d; ++j) pb[static_cast<std::size_t>(j)] -= 2.0 * kPi * mod(static_cast<long long>(top) * j, d) / d;
    weight = detail::bell_diagonal_weight(m, d, pa, pb, &diag);
  }
  report.residual = std::sqrt(std::max(0.0, frob2 - weight));
  report.frame_a = z_phase_unitary(pa);
  report.frame_b = z_phase_unitary(pb);
  if (report.residual <= options.label_tolerance) report.bell_lambda = diag;
  return report;
}

/// State after applying the report's frame rotations.
inline DensityMatrix rotated_state(const DensityMatrix& rho, const SpectrumReport& report) {
  return apply_misalignment(rho, report.frame_a, report.frame_b);
}

/// e(k) = sum_l lambda(k, l): distribution of b - a in the Z basis.
inline std::vector<double> z_error_distribution(const RealMatrix& bell_lambda) {
  detail::require(bell_lambda.rows() == bell_lambda.cols(), "z_error_distribution: expected a d x d table");
  std::vector<double> e(static_cast<std::size_t>(bell_lambda.rows()));
  for (Eigen::Index k = 0; k < bell_lambda.rows(); ++k) e[static_cast<std::size_t>(k)] = bell_lambda.row(k).sum();
  return e;
}

inline std::vector<double> z_error_distribution(const SpectrumReport& report) {
  if (!report.labeled()) {
    throw InvalidInput("z_error_distribution: spectrum has no Bell labels (residual " + std::to_string(report.residual) + ")");
  }
  return z_error_distribution(*report.bell_lambda);
}

inline nlohmann::json to_json(const SpectrumReport& r) {
  nlohmann::json j{{"d", r.d}, {"lambda", r.lambda}, {"residual", r.residual}, {"labeled", r.labeled()}};
  if (r.bell_lambda) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index k = 0; k < r.bell_lambda->rows(); ++k) {
      std::vector<double> row(r.bell_lambda->cols());
      for (Eigen::Index l = 0; l < r.bell_lambda->cols(); ++l) row[static_cast<std::size_t>(l)] = (*r.bell_lambda)(k, l);
      rows.push_back(row);
    }
    j["bell_lambda"] = rows;
  }
  return j;
}

/// Reads {"lambda": [...], "residual": r} with optional "d" and "bell_lambda".
inline SpectrumReport spectrum_from_json(const nlohmann::json& j) {
  try {
    SpectrumReport r;
    r.lambda = j.at("lambda").get<std::vector<double>>();
    r.residual = j.at("residual").get<double>();
    const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(r.lambda.size()))));
    r.d = j.value("d", d);
    detail::require(r.d * r.d == static_cast<int>(r.lambda.size()), "lambda must have d^2 entries");
    require_prime(r.d);
    r.frame_a = ComplexMatrix::Identity(r.d, r.d);
    r.frame_b = ComplexMatrix::Identity(r.d, r.d);
    if (j.contains("bell_lambda")) {
      RealMatrix b(r.d, r.d);
      const auto& rows = j.at("bell_lambda");
      detail::require(static_cast<int>(rows.size()) == r.d, "bell_lambda must have d rows");
      for (int k = 0; k < r.d; ++k) {
        detail::require(static_cast<int>(rows[k].size()) == r.d, "bell_lambda rows must have d entries");
        for (int l = 0; l < r.d; ++l) b(k, l) = rows[k][l].get<double>();
      }
      r.bell_lambda = b;
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed SpectrumReport JSON: ") + e.what());
  }
}

}  // namespace rfiqkd
