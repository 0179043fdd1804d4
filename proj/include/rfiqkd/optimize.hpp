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

// Small derivative-free optimizers shared by the rotation search and the
// finite-key parameter optimizer. Both are deterministic.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace rfiqkd::opt {

struct NelderMeadOptions {
  double initial_step = 0.1;
  double x_tol = 1e-10;
  double f_tol = 1e-15;
  int max_evaluations = 20000;
};

struct Minimum {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
template <typename F>
Minimum nelder_mead(F&& f, std::vector<double> start, const NelderMeadOptions& o = {}) {
  const std::size_t n = start.size();
  Minimum best;
  if (n == 0) {
    best.x = start;
    best.value = f(start);
    best.evaluations = 1;
    return best;
  }
  int evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<std::vector<double>> simplex(n + 1, start);
  std::vector<double> values(n + 1);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += o.initial_step;
  for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  while (evals < o.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t lo = order.front(), hi = order.back(), next_hi = order[n - 1];

    double spread = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) spread = std::max(spread, std::abs(simplex[i][j] - simplex[lo][j]));
    }
    if (spread <= o.x_tol || std::abs(values[hi] - values[lo]) <= o.f_tol) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == hi) continue;
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
    }
    auto along = [&](double t, std::vector<double>& out) {
      for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (simplex[hi][j] - centroid[j]);
    };

    along(-1.0, trial);
    const double fr = eval(trial);
    if (fr < values[lo]) {
      along(-2.0, trial2);
      const double fe = eval(trial2);
      if (fe < fr) {
        simplex[hi] = trial2;
        values[hi] = fe;
      } else {
        simplex[hi] = trial;
        values[hi] = fr;
      }
      continue;
    }
    if (fr < values[next_hi]) {
      simplex[hi] = trial;
      values[hi] = fr;
      continue;
    }
    const bool outside = fr < values[hi];
    along(outside ? -0.5 : 0.5, trial2);
    const double fc = eval(trial2);
    if (fc < (outside ? fr : values[hi])) {
      simplex[hi] = trial2;
      values[hi] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == lo) continue;
      for (std::size_t j = 0; j < n; ++j) simplex[i][j] = simplex[lo][j] + 0.5 * (simplex[i][j] - simplex[lo][j]);
      values[i] = eval(simplex[i]);
    }
  }
  const auto it = std::min_element(values.begin(), values.end());
  best.x = simplex[static_cast<std::size_t>(it - values.begin())];
  best.value = *it;
  best.evaluations = evals;
  return best;
}

/// Root of a nondecreasing function on [lo, hi] by bisection. Returns lo if
/// g(lo) >= 0 and hi if g(hi) <= 0.
template <typename G>
double bisect_increasing(G&& g, double lo, double hi, int iterations = 200) {
  if (g(lo) >= 0.0) return lo;
  if (g(hi) <= 0.0) return hi;
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace rfiqkd::opt
