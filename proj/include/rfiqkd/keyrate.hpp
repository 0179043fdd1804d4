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

// Asymptotic and finite-size secret-key rates. All entropies are in bits.
//
// Tomographic bound (per transmitted signal):
//   r = n/N [ min_{ball} H(A|E) - leak_EC/n - (2/n) log(1/eps_PA)
//             - (2 log d + 3) sqrt(log(2/eps_bar) / n) ]
// Uncertainty-relation bound:
//   r = n/N [ log d - H(v(mu)) - leak_EC/n - (2/n) log(1/(2 (eps_PA - eps_bar))) ]

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "rfiqkd/errors.hpp"
#include "rfiqkd/linalg.hpp"
#include "rfiqkd/optimize.hpp"
#include "rfiqkd/qudit.hpp"
#include "rfiqkd/states.hpp"
#include "rfiqkd/tomography.hpp"

namespace rfiqkd {

// ---------------------------------------------------------------------------
// Entropies

inline double shannon_entropy(std::span<const double> p) {
  double total = 0.0;
  for (double v : p) {
    detail::require(v >= -1e-12, "shannon_entropy: negative probability");
    total += v;
  }
  detail::require(std::abs(total - 1.0) <= 1e-9, "shannon_entropy: probabilities must sum to 1");
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

inline double shannon_entropy(const RealMatrix& p) {
  return shannon_entropy(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
}

inline double binary_entropy(double q) {
  const double v[2] = {q, 1.0 - q};
  return shannon_entropy(v);
}

/// log2 d - H(lambda); negative means no key.
inline double asymptotic_rate_tomographic(std::span<const double> lambda, int d) {
  detail::require(static_cast<int>(lambda.size()) == d * d, "asymptotic_rate_tomographic: need d^2 eigenvalues");
  return std::log2(static_cast<double>(d)) - shannon_entropy(lambda);
}

/// H(A|E) = log2 d - H(lambda) + H(e_Z) for a Bell-labelled spectrum [k][l].
inline double conditional_entropy_AE(const RealMatrix& bell_lambda) {
  const auto d = static_cast<int>(bell_lambda.rows());
  detail::require(bell_lambda.cols() == d, "conditional_entropy_AE: expected a d x d table");
  const auto e = z_error_distribution(bell_lambda);
  return std::log2(static_cast<double>(d)) - shannon_entropy(bell_lambda) + shannon_entropy(e);
}

/// Bell labelling of an unlabelled spectrum that minimizes H(A|E) among
/// assignments whose k = 0 class carries mass 1 - q_hat. Only the grouping
/// into k classes matters; given the k = 0 class, consecutive blocks of the
/// sorted remainder minimize H(e_Z). The k = 0 class is found exhaustively for
/// d <= 5 and from sorted blocks above that.
inline RealMatrix worst_case_labeling(std::span<const double> lambda, int d, double q_hat, double tol = 1e-6) {
  require_prime(d);
  detail::require(static_cast<int>(lambda.size()) == d * d, "worst_case_labeling: need d^2 values");
  std::vector<double> sorted(lambda.begin(), lambda.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double target = 1.0 - q_hat;
  const int n = d * d;

  auto labeling_for = [&](const std::vector<int>& group0) {
    RealMatrix out(d, d);
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (int l = 0; l < d; ++l) {
      out(0, l) = sorted[static_cast<std::size_t>(group0[static_cast<std::size_t>(l)])];
      used[static_cast<std::size_t>(group0[static_cast<std::size_t>(l)])] = true;
    }
    int pos = 0;
    for (int i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      out(1 + pos / d, pos % d) = sorted[static_cast<std::size_t>(i)];
      ++pos;
    }
    return out;
  };

  std::vector<std::vector<int>> candidates;
  if (d <= 5) {
    std::vector<int> pick(static_cast<std::size_t>(d));
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
      candidates.push_back(pick);
      int i = d - 1;
      while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - d + i) --i;
      if (i < 0) break;
      ++pick[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < d; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
  } else {
    for (int start = 0; start + d <= n; ++start) {
      std::vector<int> pick(static_cast<std::size_t>(d));
      std::iota(pick.begin(), pick.end(), start);
      candidates.push_back(std::move(pick));
    }
  }

  auto gap = [&](const std::vector<int>& g) {
    double s = 0.0;
    for (int i : g) s += sorted[static_cast<std::size_t>(i)];
    return std::abs(s - target);
  };
  double min_gap = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) min_gap = std::min(min_gap, gap(c));

  std::optional<RealMatrix> best;
  double best_value = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    if (gap(c) > min_gap + tol) continue;
    RealMatrix lab = labeling_for(c);
    const double h = shannon_entropy(z_error_distribution(lab));
    if (h < best_value) {
      best_value = h;
      best = std::move(lab);
    }
  }
  return *best;
}

// ---------------------------------------------------------------------------
// Fluctuation ball

struct BallMinimum {
  double value = 0.0;
  RealMatrix argmin;
};

namespace detail {

// H(A|E) is log2 d - H(L|K) with K the Z-error class; conditional entropy is
// concave, so the objective is convex on the box-simplex. It is minimized by
// pairwise mass transfers along the most violating gradient pair. The
// gradient log2((x + delta) / (e_k + d delta)) uses a tiny delta so that
// empty classes have a finite derivative.
class BallSolver {
 public:
  BallSolver(int d, std::vector<double> lo, std::vector<double> hi)
      : d_(d), lo_(std::move(lo)), hi_(std::move(hi)) {}

  std::vector<double> solve(std::vector<double> x) const {
    const int n = d_ * d_;
    std::vector<double> e(static_cast<std::size_t>(d_)), g(static_cast<std::size_t>(n));
    for (int iter = 0; iter < kMaxIterations; ++iter) {
      gradient(x, e, g);
      int up = -1, down = -1;  // receive mass / give mass
      for (int i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        if (x[u] > lo_[u] + kRoom && (down < 0 || g[u] > g[static_cast<std::size_t>(down)])) down = i;
        if (x[u] < hi_[u] - kRoom && (up < 0 || g[u] < g[static_cast<std::size_t>(up)])) up = i;
      }
      if (up < 0 || down < 0 || up == down) break;
      if (g[static_cast<std::size_t>(down)] - g[static_cast<std::size_t>(up)] < kGradientTol) break;
      const auto iu = static_cast<std::size_t>(up), id = static_cast<std::size_t>(down);
      const double t_max = std::min(x[id] - lo_[id], hi_[iu] - x[iu]);
      const bool same_class = up / d_ == down / d_;
      const double e_up = e[static_cast<std::size_t>(up / d_)], e_down = e[static_cast<std::size_t>(down / d_)];
      // Derivative of the objective along the transfer, O(1) per evaluation.
      auto slope = [&](double t) {
        const double shift = same_class ? 0.0 : t;
        return partial(x[iu] + t, e_up + shift) - partial(x[id] - t, e_down - shift);
      };
      double t = t_max;
      if (slope(t_max) > 0.0) {
        double a = 0.0, b = t_max;
        for (int k = 0; k < 100 && b - a > 1e-17 * (1.0 + b); ++k) {
          const double mid = 0.5 * (a + b);
          (slope(mid) < 0.0 ? a : b) = mid;
        }
        t = 0.5 * (a + b);
      }
      if (t <= 0.0) break;
      x[iu] += t;
      x[id] -= t;
    }
    return x;
  }
 private:
  static constexpr int kMaxIterations = 20000;
  static constexpr double kDelta = 1e-15;
  static constexpr double kRoom = 1e-16;
  static constexpr double kGradientTol = 1e-11;

  double partial(double x, double e) const {
    return std::log2((std::max(x, 0.0) + kDelta) / (std::max(e, 0.0) + d_ * kDelta));
  }

  void gradient(const std::vector<double>& x, std::vector<double>& e, std::vector<double>& g) const {
    for (int k = 0; k < d_; ++k) {
      double s = 0.0;
      for (int l = 0; l < d_; ++l) s += x[static_cast<std::size_t>(k * d_ + l)];
      e[static_cast<std::size_t>(k)] = s;
    }
    for (int i = 0; i < d_ * d_; ++i) {
      g[static_cast<std::size_t>(i)] = partial(x[static_cast<std::size_t>(i)], e[static_cast<std::size_t>(i / d_)]);
    }
  }

  int d_;
  std::vector<double> lo_, hi_;
};

inline RealMatrix to_table(const std::vector<double>& x, int d) {
  RealMatrix out(d, d);
  for (int i = 0; i < d * d; ++i) out(i / d, i % d) = std::max(0.0, x[static_cast<std::size_t>(i)]);
  return out / out.sum();
}

}  // namespace detail

/// min H(A|E) over labelled spectra with |lambda'_i - lambda_hat_i| <= mu.
inline BallMinimum min_HAE_over_ball(const RealMatrix& lambda_hat, double mu) {
  const auto d = static_cast<int>(lambda_hat.rows());
  detail::require(lambda_hat.cols() == d && d >= 2, "min_HAE_over_ball: expected a d x d table");
  detail::require(mu >= 0.0 && std::isfinite(mu), "min_HAE_over_ball: mu must be non-negative");
  if (mu == 0.0) return {conditional_entropy_AE(lambda_hat), lambda_hat};

  const int n = d * d;
  std::vector<double> lo(static_cast<std::size_t>(n)), hi(static_cast<std::size_t>(n)), x(static_cast<std::size_t>(n));
  double sum_lo = 0.0, sum_hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = lambda_hat(i / d, i % d);
    if (v < -mu - 1e-12) throw InvalidInput("min_HAE_over_ball: ball contains no valid distribution");
    const auto u = static_cast<std::size_t>(i);
    lo[u] = std::max(0.0, v - mu);
    hi[u] = std::min(1.0, v + mu);
    x[u] = std::clamp(v, lo[u], hi[u]);
    sum_lo += lo[u];
    sum_hi += hi[u];
  }
  if (sum_lo > 1.0 + 1e-12 || sum_hi < 1.0 - 1e-12) {
    throw InvalidInput("min_HAE_over_ball: ball contains no valid distribution");
  }
  // Restore the unit sum inside the box.
  double excess = std::accumulate(x.begin(), x.end(), 0.0) - 1.0;
  for (int i = 0; i < n && std::abs(excess) > 0.0; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double room = excess > 0.0 ? x[u] - lo[u] : hi[u] - x[u];
    const double step = std::min(room, std::abs(excess));
    x[u] += excess > 0.0 ? -step : step;
    excess += excess > 0.0 ? -step : step;
  }

  const detail::BallSolver solver(d, lo, hi);
  const RealMatrix best = detail::to_table(solver.solve(std::move(x)), d);
  const double value = std::min(conditional_entropy_AE(best), conditional_entropy_AE(lambda_hat));
  return {value, best};
}

/// Hoeffding half-width sqrt(ln(1/eps_pe) / (2 m)) for a probability
/// estimated from m samples.
inline double mu_fluctuation(double m, double eps_pe) {
  detail::require(m >= 1.0, "mu_fluctuation: need at least one sample");
  detail::require(eps_pe > 0.0 && eps_pe < 1.0, "mu_fluctuation: eps_pe must lie in (0,1)");
  return std::sqrt(std::log(1.0 / eps_pe) / (2.0 * m));
}

inline double leak_ec(double n, std::span<const double> e_z, double ec_efficiency) {
  detail::require(ec_efficiency >= 1.0, "leak_ec: efficiency must be >= 1");
  return ec_efficiency * n * shannon_entropy(e_z);
}

/// Maximum-entropy distribution within |v' - v| <= mu: v'_i = clamp(t, v_i - mu, v_i + mu)
/// with the level t fixed by normalization.
inline std::vector<double> widen_distribution(std::span<const double> v, double mu) {
  detail::require(mu >= 0.0, "widen_distribution: mu must be non-negative");
  if (mu == 0.0) return {v.begin(), v.end()};
  auto total = [&](double t) {
    double s = 0.0;
    for (double x : v) s += std::clamp(t, std::max(0.0, x - mu), x + mu);
    return s;
  };
  const double t = opt::bisect_increasing([&](double level) { return total(level) - 1.0; }, 0.0, 1.0);
  std::vector<double> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(std::clamp(t, std::max(0.0, x - mu), x + mu));
  const double s = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& x : out) x /= s;
  return out;
}

// ---------------------------------------------------------------------------
// Uncertainty-relation virtual basis

struct VirtualDistribution {
  std::vector<double> v;  // distribution of (a + multiplier * b) mod d
  MubSetting setting_a;
  MubSetting setting_b;
  int multiplier = 1;
};

/// Among pairs of bases unbiased to Z, picks the pair and linear outcome
/// matching with the most predictable difference a + s b (mod d), then
/// widens that distribution by mu.
inline VirtualDistribution ur_virtual_distribution(const DensityMatrix& rho, double mu = 0.0) {
  const int d = bipartite_dim(rho);
  const auto bases = mub_eigenbases(d);
  VirtualDistribution best;
  double best_h = std::numeric_limits<double>::infinity();
  for (int ia = 1; ia <= d; ++ia) {
    for (int ib = 1; ib <= d; ++ib) {
      const RealMatrix p = measure_joint(rho, bases[static_cast<std::size_t>(ia)].basis, bases[static_cast<std::size_t>(ib)].basis);
      for (int s = 1; s < d; ++s) {
        std::vector<double> v(static_cast<std::size_t>(d), 0.0);
        for (int a = 0; a < d; ++a) {
          for (int b = 0; b < d; ++b) v[static_cast<std::size_t>(mod(a + static_cast<long long>(s) * b, d))] += p(a, b);
        }
        const double h = shannon_entropy(v);
        if (h < best_h - 1e-13) {
          best_h = h;
          best = {v, bases[static_cast<std::size_t>(ia)].setting, bases[static_cast<std::size_t>(ib)].setting, s};
        }
      }
    }
  }
  // Outcome relabeling so that entry 0 is the "agreement" outcome.
  const auto top = std::max_element(best.v.begin(), best.v.end());
  std::rotate(best.v.begin(), top, best.v.end());
  best.v = widen_distribution(best.v, mu);
  return best;
}

// ---------------------------------------------------------------------------
// Finite-key bookkeeping

struct EpsilonBudget {
  double eps_ec = 0.0;
  double eps_pa = 0.0;
  double eps_pe = 0.0;
  double eps_bar = 0.0;
  int n_pe = 1;

  double composed() const { return eps_ec + eps_pa + n_pe * eps_pe + eps_bar; }

  void validate(std::optional<double> eps_sec = std::nullopt) const {
    for (double e : {eps_ec, eps_pa, eps_pe, eps_bar}) {
      detail::require(e > 0.0 && e < 1.0, "EpsilonBudget: components must lie in (0,1)");
    }
    detail::require(n_pe >= 1, "EpsilonBudget: n_pe must be positive");
    if (eps_sec) detail::require(composed() <= *eps_sec * (1.0 + 1e-9), "EpsilonBudget: composition exceeds eps_sec");
  }
};

/// Independently estimated probabilities: d^2 cells per setting pair, less one
/// for normalization, over (d+1)^2 pairs.
inline int default_n_pe(int d) { return (d + 1) * (d + 1) * (d * d - 1); }

struct FiniteKeyParams {
  double N = 0.0;
  double n = 0.0;
  int d = 2;
  RealMatrix lambda_hat;        // Bell-labelled estimate [k][l]
  std::vector<double> e_z_hat;  // observed Z error distribution
  double mu = 0.0;
  EpsilonBudget budget;
  double ec_efficiency = 1.0;

  double q_hat() const { return e_z_hat.empty() ? 0.0 : 1.0 - e_z_hat.front(); }

  void validate() const {
    require_prime(d);
    detail::require(n > 0.0 && n <= N, "FiniteKeyParams: need 0 < n <= N");
    detail::require(mu >= 0.0, "FiniteKeyParams: mu must be non-negative");
    detail::require(static_cast<int>(e_z_hat.size()) == d, "FiniteKeyParams: e_z_hat must have d entries");
    detail::require(ec_efficiency >= 1.0, "FiniteKeyParams: ec_efficiency must be >= 1");
    budget.validate();
  }
};

enum class Method { tomographic, ur };

inline std::string to_string(Method m) { return m == Method::tomographic ? "tomographic" : "ur"; }

inline Method parse_method(const std::string& s) {
  if (s == "tomographic") return Method::tomographic;
  if (s == "ur") return Method::ur;
  throw InvalidInput("unknown method '" + s + "'");
}

/// Each subtracted quantity is per key bit.
struct RateTerms {
  double entropy = 0.0;    // min H(A|E), or log d - H(v) for the UR bound
  double leak_ec = 0.0;    // leak_EC / n
  double privacy = 0.0;    // privacy-amplification term
  double smoothing = 0.0;  // tomographic smoothing correction, zero for UR

  double bracket() const { return entropy - leak_ec - privacy - smoothing; }
};

struct RateResult {
  Method method = Method::tomographic;
  double rate_per_signal = 0.0;
  double key_length = 0.0;
  double N = 0.0;
  double n = 0.0;
  RateTerms terms;
};

inline RateResult finite_rate_tomographic(const FiniteKeyParams& p) {
  p.validate();
  const auto& b = p.budget;
  RateTerms t;
  t.entropy = min_HAE_over_ball(p.lambda_hat, p.mu).value;
  t.leak_ec = leak_ec(p.n, p.e_z_hat, p.ec_efficiency) / p.n;
  t.privacy = (2.0 / p.n) * std::log2(1.0 / b.eps_pa);
  t.smoothing = (2.0 * std::log2(static_cast<double>(p.d)) + 3.0) * std::sqrt(std::log2(2.0 / b.eps_bar) / p.n);
  RateResult r{Method::tomographic, 0.0, 0.0, p.N, p.n, t};
  r.key_length = p.n * t.bracket();
  r.rate_per_signal = r.key_length / p.N;
  return r;
}

/// `v` is the already widened virtual distribution.
inline RateResult finite_rate_ur(const FiniteKeyParams& p, std::span<const double> v) {
  p.validate();
  const auto& b = p.budget;
  if (!(b.eps_pa > b.eps_bar)) throw InvalidInput("finite_rate_ur: requires eps_pa > eps_bar");
  detail::require(static_cast<int>(v.size()) == p.d, "finite_rate_ur: v must have d entries");
  RateTerms t;
  t.entropy = std::log2(static_cast<double>(p.d)) - shannon_entropy(v);
  t.leak_ec = leak_ec(p.n, p.e_z_hat, p.ec_efficiency) / p.n;
  t.privacy = (2.0 / p.n) * std::log2(1.0 / (2.0 * (b.eps_pa - b.eps_bar)));
  RateResult r{Method::ur, 0.0, 0.0, p.N, p.n, t};
  r.key_length = p.n * t.bracket();
  r.rate_per_signal = r.key_length / p.N;
  return r;
}

// ---------------------------------------------------------------------------
// Channel estimate and optimizer

/// Everything the rate formulas need from a (reconstructed) state.
struct ChannelEstimate {
  int d = 2;
  SpectrumReport spectrum;
  RealMatrix bell_lambda;       // labelled, or worst-case labelling when unlabelled
  std::vector<double> e_z;      // observed Z error distribution
  std::vector<double> v_hat;    // UR virtual distribution before widening
  int n_pe = 1;

  double asymptotic_tomographic(double ec_efficiency = 1.0) const {
    return conditional_entropy_AE(bell_lambda) - ec_efficiency * shannon_entropy(e_z);
  }
  double asymptotic_ur(double ec_efficiency = 1.0) const {
    return std::log2(static_cast<double>(d)) - shannon_entropy(v_hat) - ec_efficiency * shannon_entropy(e_z);
  }
};

/// Distribution of b - a (mod d) for Z measurements on both sides.
inline std::vector<double> observed_z_errors(const DensityMatrix& rho) {
  const int d = bipartite_dim(rho);
  std::vector<double> e(static_cast<std::size_t>(d), 0.0);
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) e[static_cast<std::size_t>(mod(b - a, d))] += std::max(0.0, rho.matrix()(a * d + b, a * d + b).real());
  }
  const double s = std::accumulate(e.begin(), e.end(), 0.0);
  for (double& x : e) x /= s;
  return e;
}

inline ChannelEstimate estimate_channel(const DensityMatrix& rho, const SpectrumOptions& options = {}) {
  ChannelEstimate est;
  est.d = bipartite_dim(rho);
  est.spectrum = extract_spectrum(rho, options);
  est.e_z = observed_z_errors(rho);
  est.bell_lambda = est.spectrum.labeled()
                        ? *est.spectrum.bell_lambda
                        : worst_case_labeling(est.spectrum.lambda, est.d, 1.0 - est.e_z.front());
  // Clean round-off so downstream entropies see a distribution.
  est.bell_lambda = est.bell_lambda.cwiseMax(0.0);
  est.bell_lambda /= est.bell_lambda.sum();
  est.v_hat = ur_virtual_distribution(rotated_state(rho, est.spectrum), 0.0).v;
  est.n_pe = default_n_pe(est.d);
  return est;
}

enum class EpsBarCoupling { tied_to_pe, free };

struct OptimizerOptions {
  int key_fraction_points = 24;  // grid over logit(n/N)
  int split_points = 5;          // grid per budget-split coordinate
  bool refine = true;
  EpsBarCoupling ur_coupling = EpsBarCoupling::tied_to_pe;
  double ec_efficiency = 1.0;
};

struct OptimizedRate {
  RateResult result;
  double key_fraction = 0.0;  // n / N
  double mu = 0.0;
  EpsilonBudget budget;
  bool positive = false;
};

namespace detail {

inline double logistic(double y) { return 1.0 / (1.0 + std::exp(-y)); }

struct RateProblem {
  double N;
  const ChannelEstimate& est;
  double eps_sec;
  double eps_ec;
  Method method;
  const OptimizerOptions& options;

  bool three_way_split() const {
    return method == Method::tomographic || options.ur_coupling == EpsBarCoupling::free;
  }
  std::size_t dims() const { return three_way_split() ? 3 : 2; }

  std::optional<OptimizedRate> evaluate(const std::vector<double>& y) const {
    const double frac = logistic(y[0]);
    const double n = frac * N;
    const int settings = (est.d + 1) * (est.d + 1);
    const double m_per_setting = (N - n) / settings;
    if (n < 1.0 || m_per_setting < 1.0) return std::nullopt;

    const double remaining = eps_sec - eps_ec;
    EpsilonBudget b;
    b.eps_ec = eps_ec;
    b.n_pe = est.n_pe;
    if (three_way_split()) {
      const double w0 = 1.0, w1 = std::exp(y[1]), w2 = std::exp(y[2]);
      const double s = w0 + w1 + w2;
      b.eps_pa = remaining * w0 / s;
      b.eps_pe = remaining * (w1 / s) / est.n_pe;
      b.eps_bar = remaining * w2 / s;
    } else {
      const double w1 = std::exp(y[1]);
      b.eps_pa = remaining / (1.0 + w1);
      b.eps_pe = remaining * (w1 / (1.0 + w1)) / (est.n_pe + 1);
      b.eps_bar = b.eps_pe;
    }
    if (!(b.eps_pa > 0.0 && b.eps_pe > 0.0 && b.eps_bar > 0.0)) return std::nullopt;
    if (method == Method::ur && !(b.eps_pa > b.eps_bar)) return std::nullopt;

    FiniteKeyParams p;
    p.N = N;
    p.n = n;
    p.d = est.d;
    p.lambda_hat = est.bell_lambda;
    p.e_z_hat = est.e_z;
    p.mu = mu_fluctuation(m_per_setting, b.eps_pe);
    p.budget = b;
    p.ec_efficiency = options.ec_efficiency;

    OptimizedRate out;
    out.key_fraction = frac;
    out.mu = p.mu;
    out.budget = b;
    out.result = method == Method::tomographic ? finite_rate_tomographic(p)
                                               : finite_rate_ur(p, widen_distribution(est.v_hat, p.mu));
    out.positive = out.result.rate_per_signal > 0.0;
    return out;
  }

  double objective(const std::vector<double>& y) const {
    const auto r = evaluate(y);
    return r ? -r->result.rate_per_signal : std::numeric_limits<double>::infinity();
  }
};

}  // namespace detail

/// Maximizes the finite-key rate over n/N and the split of eps_sec - eps_EC
/// among eps_PA, n_PE eps_PE and eps_bar: a grid search followed by
/// Nelder-Mead refinement from the best grid point. PE signals are spread
/// evenly over the (d+1)^2 setting pairs, which fixes the sample count behind
/// each fluctuation radius.
inline OptimizedRate optimize_rate(double N, const ChannelEstimate& est, double eps_sec, double eps_ec, Method method,
                                   const OptimizerOptions& options = {}) {
  detail::require(N >= 1.0, "optimize_rate: N must be positive");
  detail::require(eps_ec > 0.0 && eps_ec < eps_sec && eps_sec < 1.0, "optimize_rate: need 0 < eps_EC < eps_sec < 1");
  detail::require(options.key_fraction_points >= 2 && options.split_points >= 1, "optimize_rate: grid too small");
  const detail::RateProblem problem{N, est, eps_sec, eps_ec, method, options};

  constexpr double kFracLo = -6.0, kFracHi = 18.0;  // logit(n/N)
  constexpr double kSplitLo = -8.0, kSplitHi = 8.0;
  auto axis = [](double lo, double hi, int points, int i) {
    return points == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (points - 1);
  };

  std::optional<OptimizedRate> best;
  std::vector<double> best_y;
  const int sp = options.split_points;
  const int extra = problem.three_way_split() ? sp : 1;
  for (int i = 0; i < options.key_fraction_points; ++i) {
    for (int j = 0; j < sp; ++j) {
      for (int k = 0; k < extra; ++k) {
        std::vector<double> y{axis(kFracLo, kFracHi, options.key_fraction_points, i), axis(kSplitLo, kSplitHi, sp, j)};
        if (problem.three_way_split()) y.push_back(axis(kSplitLo, kSplitHi, sp, k));
        const auto r = problem.evaluate(y);
        // Strict improvement keeps the smallest n among ties.
        if (r && (!best || r->result.rate_per_signal > best->result.rate_per_signal)) {
          best = r;
          best_y = y;
        }
      }
    }
  }
  if (!best) throw InvalidInput("optimize_rate: N too small to allocate key and estimation signals");

  if (options.refine) {
    opt::NelderMeadOptions o;
    o.initial_step = 0.5;
    o.x_tol = 1e-9;
    o.f_tol = 1e-15;
    o.max_evaluations = 3000;
    const auto found = opt::nelder_mead([&](const std::vector<double>& y) { return problem.objective(y); }, best_y, o);
    if (const auto r = problem.evaluate(found.x); r && r->result.rate_per_signal > best->result.rate_per_signal) {
      best = r;
    }
  }
  return *best;
}

/// Smallest N (to relative precision ~1e-6) with a positive optimized rate,
/// by bisection on log10 N; nullopt if the rate is not positive at hi.
inline std::optional<double> critical_n(const ChannelEstimate& est, double eps_sec, double eps_ec, Method method,
                                        const OptimizerOptions& options = {}, double lo = 10.0, double hi = 1e15) {
  auto positive = [&](double n) {
    try {
      return optimize_rate(n, est, eps_sec, eps_ec, method, options).positive;
    } catch (const InvalidInput&) {
      return false;
    }
  };
  if (!positive(hi)) return std::nullopt;
  if (positive(lo)) return lo;
  double a = std::log10(lo), b = std::log10(hi);
  while (b - a > 1e-7) {
    const double mid = 0.5 * (a + b);
    (positive(std::pow(10.0, mid)) ? b : a) = mid;
  }
  return std::pow(10.0, b);
}

inline nlohmann::json to_json(const RateResult& r) {
  return {{"method", to_string(r.method)},
          {"rate_per_signal", r.rate_per_signal},
          {"key_length", r.key_length},
          {"N", r.N},
          {"n", r.n},
          {"rate_positive", r.rate_per_signal > 0.0},
          {"terms",
           {{"entropy", r.terms.entropy},
            {"leak_ec_per_n", r.terms.leak_ec},
            {"privacy_amplification", r.terms.privacy},
            {"smoothing", r.terms.smoothing}}}};
}

inline nlohmann::json to_json(const OptimizedRate& o) {
  nlohmann::json j = to_json(o.result);
  j["key_fraction"] = o.key_fraction;
  j["mu"] = o.mu;
  j["eps_ec"] = o.budget.eps_ec;
  j["eps_pa"] = o.budget.eps_pa;
  j["eps_pe"] = o.budget.eps_pe;
  j["eps_bar"] = o.budget.eps_bar;
  j["n_pe"] = o.budget.n_pe;
  return j;
}

}  // namespace rfiqkd
