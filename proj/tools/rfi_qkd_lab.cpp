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


#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rfiqkd/cli.hpp"

namespace {

namespace cli = rfiqkd::cli;

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> d;  // single prime, or a comma list for sweep
  std::optional<double> qber;
  std::optional<double> z_tilt_deg;
  std::optional<std::uint64_t> frame_seed;
  std::optional<std::string> shots;
  std::optional<double> N;
  std::optional<double> eps_sec;
  std::optional<double> eps_ec;
  std::optional<double> ec_efficiency;
  std::optional<std::string> method;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta_deg;
  std::optional<std::string> in;

  std::optional<std::string> n_grid;
  double n_min = 1e3;
  double n_max = 1e12;
  int n_points = 30;

  std::optional<std::string> theta_grid;
  double theta_min = 0.0;
  double theta_max = 90.0;
  double theta_step = 0.5;
};

void add_config_options(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "flat JSON config; flags override its fields");
  app->add_option("--d", o.d, "prime local dimension");
  app->add_option("--qber", o.qber, "isotropic-noise QBER");
  app->add_option("--z-tilt-deg", o.z_tilt_deg, "tilt of Bob's Z axis in degrees (d = 2)");
  app->add_option("--frame-seed", o.frame_seed, "seed of the random Z-commuting frames; 0 keeps them aligned");
  app->add_option("--beta-deg", o.beta_deg, "Bob's Z rotation angle in degrees");
  app->add_option("--shots", o.shots, "shots per setting pair, or \"exact\"");
  app->add_option("--seed", o.seed, "sampling seed");
  app->add_option("--N", o.N, "total number of signals");
  app->add_option("--eps-sec", o.eps_sec, "total security parameter");
  app->add_option("--eps-ec", o.eps_ec, "error-correction failure probability");
  app->add_option("--ec-efficiency", o.ec_efficiency, "error-correction efficiency (>= 1)");
  app->add_option("--method", o.method, "tomographic, ur or both");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw cli::ConfigError(what + ": cannot parse '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& what) {
  const double v = parse_double(s, what);
  if (v != static_cast<int>(v)) throw cli::ConfigError(what + ": expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

std::vector<int> parse_dims(const std::string& s) {
  std::vector<int> dims;
  for (const auto& item : split_list(s)) dims.push_back(parse_int(item, "--d"));
  if (dims.empty()) throw cli::ConfigError("--d: empty list");
  return dims;
}

/// Config file first, then flags. `allow_list` keeps a comma list in --d for
/// the caller to expand.
cli::RunConfig resolve(const Overrides& o, bool allow_list = false) {
  cli::RunConfig c = o.config ? cli::load_config(*o.config) : cli::RunConfig{};
  if (o.d) {
    const auto dims = parse_dims(*o.d);
    if (dims.size() > 1 && !allow_list) throw cli::ConfigError("--d: a single dimension is required here");
    c.d = dims.front();
  }
  if (o.qber) c.qber = *o.qber;
  if (o.z_tilt_deg) c.z_tilt_deg = *o.z_tilt_deg;
  if (o.frame_seed) c.frame_seed = *o.frame_seed;
  if (o.shots) c.shots = cli::parse_shots(*o.shots);
  if (o.N) c.N = *o.N;
  if (o.eps_sec) c.eps_sec = *o.eps_sec;
  if (o.eps_ec) c.eps_ec = *o.eps_ec;
  if (o.ec_efficiency) c.ec_efficiency = *o.ec_efficiency;
  if (o.method) c.method = *o.method;
  if (o.out) c.output_path = *o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.beta_deg) c.beta_deg = *o.beta_deg;
  return c;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
  } else {
    cli::write_text(path, text);
  }
}

std::vector<rfiqkd::MeasurementStats> stats_input(const Overrides& o, const cli::RunConfig& c) {
  return o.in ? cli::read_stats_dir(*o.in) : cli::simulate_stats(c);
}

int run(int argc, char** argv) {
  CLI::App app{"Reference-frame-independent QKD laboratory"};
  app.require_subcommand(1);
  Overrides o;

  auto* simulate = app.add_subcommand("simulate", "write exact or sampled statistics for every setting pair");
  add_config_options(simulate, o);
  simulate->add_option("--out", o.out, "output directory")->required();

  auto* witness = app.add_subcommand("witness", "C parameter and entanglement verdict from statistics");
  witness->add_option("--in", o.in, "directory of stats_*.json files")->required();
  witness->add_option("--out", o.out, "output file (default stdout)");

  auto* reconstruct = app.add_subcommand("reconstruct", "state and spectrum reconstructed from statistics");
  reconstruct->add_option("--in", o.in, "directory of stats_*.json files")->required();
  reconstruct->add_option("--out", o.out, "output file (default stdout)");

  auto* rate = app.add_subcommand("rate", "optimized finite-key rates");
  add_config_options(rate, o);
  rate->add_option("--in", o.in, "directory of stats_*.json files (default: exact statistics of the config)");
  rate->add_option("--out", o.out, "output file (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "CSV of optimized rates over an N grid");
  add_config_options(sweep, o);
  sweep->add_option("--n-grid", o.n_grid, "comma-separated ascending N values");
  sweep->add_option("--n-min", o.n_min, "smallest N of the log grid");
  sweep->add_option("--n-max", o.n_max, "largest N of the log grid");
  sweep->add_option("--n-points", o.n_points, "points of the log grid");
  sweep->add_option("--out", o.out, "output file (default stdout)");

  auto* scan = app.add_subcommand("misalign-scan", "qubit rate against Z-axis tilt");
  scan->add_option("--d", o.d, "must be 2");
  scan->add_option("--theta-grid", o.theta_grid, "comma-separated angles in degrees");
  scan->add_option("--theta-min", o.theta_min, "first angle in degrees");
  scan->add_option("--theta-max", o.theta_max, "last angle in degrees");
  scan->add_option("--theta-step", o.theta_step, "angle step in degrees");
  scan->add_option("--out", o.out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitConfig;
  }

  try {
    if (simulate->parsed()) {
      const auto c = resolve(o);
      c.validate();
      cli::write_stats_dir(c.output_path, cli::simulate_stats(c));
    } else if (witness->parsed()) {
      emit(cli::dump(cli::witness_report(cli::read_stats_dir(*o.in))), o.out.value_or(""));
    } else if (reconstruct->parsed()) {
      emit(cli::dump(cli::reconstruct_report(cli::read_stats_dir(*o.in))), o.out.value_or(""));
    } else if (rate->parsed()) {
      const auto c = resolve(o);
      c.validate();
      emit(cli::dump(cli::rate_report(c, stats_input(o, c))), c.output_path);
    } else if (sweep->parsed()) {
      const auto c = resolve(o, true);
      const auto dims = o.d ? parse_dims(*o.d) : std::vector<int>{c.d};
      std::vector<double> grid;
      if (o.n_grid) {
        for (const auto& item : split_list(*o.n_grid)) grid.push_back(parse_double(item, "--n-grid"));
      } else {
        grid = cli::log_grid(o.n_min, o.n_max, o.n_points);
      }
      emit(cli::sweep_csv(cli::sweep(c, dims, grid, cli::thread_cap())), c.output_path);
    } else if (scan->parsed()) {
      if (o.d && *o.d != "2") throw cli::ConfigError("misalign-scan is defined for d = 2 only");
      std::vector<double> thetas;
      if (o.theta_grid) {
        for (const auto& item : split_list(*o.theta_grid)) thetas.push_back(parse_double(item, "--theta-grid"));
      } else {
        thetas = cli::theta_grid(o.theta_min, o.theta_max, o.theta_step);
      }
      emit(cli::scan_csv(cli::misalign_scan(thetas)), o.out.value_or(""));
    }
  } catch (const cli::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitIo;
  } catch (const cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitConfig;
  } catch (const rfiqkd::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitInvalidInput;
  }
  return cli::kExitOk;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
