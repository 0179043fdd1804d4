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

// Commands behind the rfi_qkd_lab executable. Each is a function of its
// configuration; the executable only parses flags and maps errors to exit codes.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "rfiqkd/errors.hpp"
#include "rfiqkd/keyrate.hpp"
#include "rfiqkd/qudit.hpp"
#include "rfiqkd/states.hpp"
#include "rfiqkd/tomography.hpp"
#include "rfiqkd/witness.hpp"

namespace rfiqkd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 2;
inline constexpr int kExitInvalidInput = 3;
inline constexpr int kExitConfig = 4;

inline constexpr const char* kSweepHeader = "# rfi-qkd-lab sweep v1";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
  int d = 2;
  double qber = 0.01;
  double z_tilt_deg = 0.0;
  std::uint64_t frame_seed = 0;         // 0: aligned frames
  std::optional<std::uint64_t> shots;   // nullopt: exact probabilities
  double N = 1e6;
  double eps_sec = 1e-10;
  double eps_ec = 1e-20;
  double ec_efficiency = 1.0;
  std::string method = "both";
  std::string output_path;
  std::uint64_t seed = 1;               // sampling seed
  double beta_deg = 0.0;                // Bob's Z rotation, phases j * beta

  std::vector<Method> methods() const {
    if (method == "both") return {Method::tomographic, Method::ur};
    return {parse_method(method)};
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    if (!is_prime(d)) fail("d must be prime, got " + std::to_string(d));
    if (!(qber >= 0.0 && qber < (d - 1.0) / d)) fail("qber must lie in [0, (d-1)/d)");
    if (!std::isfinite(z_tilt_deg)) fail("z_tilt_deg must be finite");
    if (z_tilt_deg != 0.0 && d != 2) fail("z_tilt_deg is defined for d = 2 only");
    if (!std::isfinite(beta_deg)) fail("beta_deg must be finite");
    if (shots && *shots == 0) fail("shots must be positive or \"exact\"");
    if (!(N >= 1.0 && std::isfinite(N))) fail("N must be a positive integer");
    if (!(eps_ec > 0.0 && eps_ec < eps_sec && eps_sec < 1.0)) fail("need 0 < eps_ec < eps_sec < 1");
    if (!(ec_efficiency >= 1.0 && std::isfinite(ec_efficiency))) fail("ec_efficiency must be >= 1");
    if (method != "tomographic" && method != "ur" && method != "both") {
      fail("method must be tomographic, ur or both");
    }
  }
};

inline std::optional<std::uint64_t> parse_shots(const std::string& s) {
  if (s == "exact") return std::nullopt;
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || s[0] == '-') throw ConfigError("config: shots must be a positive integer or \"exact\"");
  return v;
}

/// Fields of a flat JSON config; unknown keys are rejected.
inline RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {}) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  static const std::set<std::string> known{"d",      "qber",          "z_tilt_deg", "frame_seed", "shots",
                                           "N",      "eps_sec",       "eps_ec",     "ec_efficiency",
                                           "method", "output_path",   "seed",       "beta_deg"};
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.count(key)) throw ConfigError("config: unknown field '" + key + "'");
    }
    if (j.contains("d")) base.d = j.at("d").get<int>();
    if (j.contains("qber")) base.qber = j.at("qber").get<double>();
    if (j.contains("z_tilt_deg")) base.z_tilt_deg = j.at("z_tilt_deg").get<double>();
    if (j.contains("frame_seed")) base.frame_seed = j.at("frame_seed").get<std::uint64_t>();
    if (j.contains("shots")) {
      const auto& s = j.at("shots");
      base.shots = s.is_string() ? parse_shots(s.get<std::string>()) : parse_shots(std::to_string(s.get<std::uint64_t>()));
    }
    if (j.contains("N")) base.N = j.at("N").get<double>();
    if (j.contains("eps_sec")) base.eps_sec = j.at("eps_sec").get<double>();
    if (j.contains("eps_ec")) base.eps_ec = j.at("eps_ec").get<double>();
    if (j.contains("ec_efficiency")) base.ec_efficiency = j.at("ec_efficiency").get<double>();
    if (j.contains("method")) base.method = j.at("method").get<std::string>();
    if (j.contains("output_path")) base.output_path = j.at("output_path").get<std::string>();
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("beta_deg")) base.beta_deg = j.at("beta_deg").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return base;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline RunConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(read_json_file(path));
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Output formatting

/// Value printed with 12 significant digits.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline double round12(double v) { return std::isfinite(v) ? std::strtod(fmt(v).c_str(), nullptr) : v; }

/// Rounds every floating-point leaf to 12 significant digits.
inline nlohmann::json rounded(nlohmann::json j) {
  if (j.is_number_float()) return round12(j.get<double>());
  if (j.is_structured()) {
    for (auto& v : j) v = rounded(v);
  }
  return j;
}

inline std::string dump(const nlohmann::json& j) { return rounded(j).dump(2) + "\n"; }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) throw IoError("cannot write " + path.string());
}

// ---------------------------------------------------------------------------
// Channel simulation

inline std::uint64_t setting_seed(std::uint64_t seed, int pair_index) {
  return seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(pair_index + 1);
}

/// Isotropic noise, then Bob's Z tilt, then the Z-commuting frames.
inline DensityMatrix channel_state(const RunConfig& c) {
  c.validate();
  DensityMatrix rho = isotropic_state(c.d, c.qber);
  if (c.z_tilt_deg != 0.0) rho = apply_z_tilt(rho, c.z_tilt_deg * kPi / 180.0);
  const ComplexMatrix id = ComplexMatrix::Identity(c.d, c.d);
  if (c.frame_seed != 0) {
    rho = apply_misalignment(rho, z_commuting_unitary(c.d, c.frame_seed), z_commuting_unitary(c.d, c.frame_seed + 1));
  }
  if (c.beta_deg != 0.0) {
    std::vector<double> phases(static_cast<std::size_t>(c.d));
    for (int j = 0; j < c.d; ++j) phases[static_cast<std::size_t>(j)] = j * c.beta_deg * kPi / 180.0;
    rho = apply_misalignment(rho, id, z_phase_unitary(phases));
  }
  return rho;
}

inline std::vector<MeasurementStats> simulate_stats(const RunConfig& c) {
  auto stats = measure_all_settings(channel_state(c));
  if (c.shots) {
    for (std::size_t i = 0; i < stats.size(); ++i) {
      stats[i] = sample_stats(stats[i], *c.shots, setting_seed(c.seed, static_cast<int>(i)));
    }
  }
  return stats;
}

inline std::string stats_file_name(const MeasurementStats& s) {
  return "stats_" + s.setting_a.label() + "_" + s.setting_b.label() + ".json";
}

inline void write_stats_dir(const std::filesystem::path& dir, const std::vector<MeasurementStats>& stats) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
  for (const auto& s : stats) write_text(dir / stats_file_name(s), dump(to_json(s)));
}

/// All stats_*.json files of a directory, in name order.
inline std::vector<MeasurementStats> read_stats_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a readable directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("stats_", 0) == 0 && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  if (ec) throw IoError("cannot list " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<MeasurementStats> stats;
  for (const auto& f : files) stats.push_back(stats_from_json(read_json_file(f)));
  if (stats.empty()) throw IncompleteInput("no stats_*.json files in " + dir.string());
  return stats;
}

// ---------------------------------------------------------------------------
// Commands

inline nlohmann::json witness_report(const std::vector<MeasurementStats>& stats) {
  const TomographyInput input(stats);
  const int d = input.d();
  const double c = c_parameter(correlators_from_stats(input));
  return {{"d", d},
          {"C", c},
          {"separable_bound", separable_bound(d)},
          {"maximum", maximal_c(d)},
          {"verdict", to_string(witness_verdict(c, d))}};
}

inline nlohmann::json matrix_json(const ComplexMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json reconstruct_report(const std::vector<MeasurementStats>& stats) {
  const TomographyInput input(stats);
  const auto rec = reconstruct_state(correlators_from_stats(input));
  const auto spectrum = extract_spectrum(rec.state);
  return {{"d", input.d()},
          {"repair_distance", rec.repair_distance},
          {"reliable", rec.reliable},
          {"purity", rec.state.purity()},
          {"qber", qber(rec.state)},
          {"spectrum", to_json(spectrum)},
          {"rho", matrix_json(rec.state.matrix())}};
}

/// Estimate used by the rate commands: tomography on the given statistics.
inline ChannelEstimate estimate_from_stats(const std::vector<MeasurementStats>& stats) {
  const TomographyInput input(stats);
  return estimate_channel(reconstruct_state(correlators_from_stats(input)).state);
}

inline nlohmann::json optimized_json(double N, const ChannelEstimate& est, const RunConfig& c, Method m,
                                     const OptimizerOptions& options) {
  try {
    return to_json(optimize_rate(N, est, c.eps_sec, c.eps_ec, m, options));
  } catch (const InvalidInput& e) {
    return {{"method", to_string(m)}, {"N", N}, {"rate_positive", false}, {"note", e.what()}};
  }
}

inline nlohmann::json rate_report(const RunConfig& c, const std::vector<MeasurementStats>& stats) {
  c.validate();
  const auto est = estimate_from_stats(stats);
  OptimizerOptions options;
  options.ec_efficiency = c.ec_efficiency;
  nlohmann::json results = nlohmann::json::array();
  bool any_positive = false;
  for (Method m : c.methods()) {
    auto r = optimized_json(c.N, est, c, m, options);
    any_positive = any_positive || r.at("rate_positive").get<bool>();
    results.push_back(std::move(r));
  }
  return {{"d", est.d},
          {"N", c.N},
          {"eps_sec", c.eps_sec},
          {"eps_ec", c.eps_ec},
          {"ec_efficiency", c.ec_efficiency},
          {"qber_observed", 1.0 - est.e_z.front()},
          {"spectrum_labeled", est.spectrum.labeled()},
          {"asymptotic", {{"tomographic", est.asymptotic_tomographic(c.ec_efficiency)},
                          {"ur", est.asymptotic_ur(c.ec_efficiency)}}},
          {"results", results},
          {"rate_positive", any_positive}};
}

// ---------------------------------------------------------------------------
// Sweeps

inline unsigned thread_cap() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RFI_QKD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(v));
  }
  return n;
}

/// Runs f(i) for i in [0, count) on up to `threads` workers.
template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& f) {
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(count, 1)));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

inline std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo >= 1.0 && hi >= lo && points >= 1)) throw ConfigError("N grid: need 1 <= n_min <= n_max and n_points >= 1");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    g[static_cast<std::size_t>(i)] = std::round(std::pow(10.0, std::log10(lo) + t * (std::log10(hi) - std::log10(lo))));
  }
  return g;
}

struct SweepRow {
  double N = 0.0;
  Method method = Method::tomographic;
  int d = 2;
  double rate = 0.0;
  double n_opt = 0.0;
  double eps_pa = 0.0;
  double eps_pe = 0.0;
  double mu = 0.0;
};

/// Rows ordered by d, then method, then N. The channel is the exact
/// statistics of `base` at each d.
inline std::vector<SweepRow> sweep(const RunConfig& base, const std::vector<int>& dims, const std::vector<double>& n_grid,
                                   unsigned threads) {
  if (dims.empty()) throw ConfigError("sweep: no dimensions given");
  if (n_grid.empty()) throw ConfigError("sweep: empty N grid");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (!(n_grid[i] >= 1.0)) throw ConfigError("sweep: N values must be >= 1");
    if (i > 0 && !(n_grid[i] > n_grid[i - 1])) throw ConfigError("sweep: N grid must be ascending");
  }
  std::vector<ChannelEstimate> estimates;
  for (int d : dims) {
    RunConfig c = base;
    c.d = d;
    c.shots.reset();
    c.validate();
    estimates.push_back(estimate_from_stats(simulate_stats(c)));
  }
  const auto methods = base.methods();
  OptimizerOptions options;
  options.ec_efficiency = base.ec_efficiency;

  std::vector<SweepRow> rows;
  for (std::size_t di = 0; di < dims.size(); ++di) {
    for (Method m : methods) {
      for (double N : n_grid) rows.push_back({N, m, dims[di]});
    }
  }
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    SweepRow& row = rows[i];
    const auto di = static_cast<std::size_t>(std::find(dims.begin(), dims.end(), row.d) - dims.begin());
    try {
      const auto o = optimize_rate(row.N, estimates[di], base.eps_sec, base.eps_ec, row.method, options);
      row.rate = o.result.rate_per_signal;
      row.n_opt = o.result.n;
      row.eps_pa = o.budget.eps_pa;
      row.eps_pe = o.budget.eps_pe;
      row.mu = o.mu;
    } catch (const InvalidInput&) {
      row.rate = 0.0;  // N too small to split into key and estimation signals
    }
  });
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << kSweepHeader << "\n" << "N,method,d,rate,n_opt,eps_pa,eps_pe,mu\n";
  for (const auto& r : rows) {
    out << fmt(r.N) << ',' << to_string(r.method) << ',' << r.d << ',' << fmt(r.rate) << ',' << fmt(r.n_opt) << ','
        << fmt(r.eps_pa) << ',' << fmt(r.eps_pe) << ',' << fmt(r.mu) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Misalignment scan (qubits)

/// QBER of the Bell state after Bob's Z axis is tilted by theta.
inline double tilt_qber(double theta_deg) {
  return qber(apply_z_tilt(bell_state(2), theta_deg * kPi / 180.0));
}

/// Asymptotic tomographic rate credited to a tilt: the Bell-diagonal state
/// with symmetric errors and the observed QBER.
inline double tilt_rate(double q) {
  const RealMatrix lam = isotropic_spectrum(2, q);
  return asymptotic_rate_tomographic(std::span<const double>(lam.data(), 4), 2);
}

struct ScanRow {
  double theta_deg = 0.0;
  double q = 0.0;
  double rate = 0.0;
};

struct ScanResult {
  std::vector<ScanRow> rows;
  std::optional<double> crossing_deg;        // first sign change, refined by bisection
  std::optional<double> largest_positive_deg;
};

inline std::vector<double> theta_grid(double lo, double hi, double step) {
  if (!(lo >= 0.0 && hi <= 90.0 && lo <= hi)) throw ConfigError("theta grid must lie in [0, 90] degrees");
  if (!(step > 0.0)) throw ConfigError("theta step must be positive");
  std::vector<double> g;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) g.push_back(lo + step * static_cast<double>(i));
  return g;
}

inline ScanResult misalign_scan(const std::vector<double>& thetas) {
  ScanResult out;
  for (double t : thetas) {
    if (!(t >= 0.0 && t <= 90.0)) throw ConfigError("theta values must lie in [0, 90] degrees");
    const double q = tilt_qber(t);
    out.rows.push_back({t, q, tilt_rate(q)});
    if (out.rows.back().rate > 0.0) out.largest_positive_deg = t;
  }
  for (std::size_t i = 1; i < out.rows.size() && !out.crossing_deg; ++i) {
    if (out.rows[i - 1].rate > 0.0 && out.rows[i].rate <= 0.0) {
      out.crossing_deg = opt::bisect_increasing([](double t) { return -tilt_rate(tilt_qber(t)); },
                                                out.rows[i - 1].theta_deg, out.rows[i].theta_deg);
    }
  }
  return out;
}

inline std::string scan_csv(const ScanResult& s) {
  std::ostringstream out;
  out << "theta_deg,Q,rate\n";
  for (const auto& r : s.rows) out << fmt(r.theta_deg) << ',' << fmt(r.q) << ',' << fmt(r.rate) << '\n';
  if (s.crossing_deg) out << "# zero_rate_crossing_deg=" << fmt(*s.crossing_deg) << '\n';
  if (s.largest_positive_deg) out << "# largest_positive_theta_deg=" << fmt(*s.largest_positive_deg) << '\n';
  return out.str();
}

}  // namespace rfiqkd::cli
