// Copyright 2026 The dsgsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dsg/cli.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <ostream>
#include <stdexcept>

#include "CLI11.hpp"
#include "dsg/analysis.hpp"
#include "dsg/config.hpp"
#include "dsg/csv.hpp"
#include "dsg/electronics.hpp"
#include "dsg/experiment.hpp"
#include "dsg/gate.hpp"

namespace dsg {

namespace fs = std::filesystem;

namespace {

// Raised for failed self-checks; maps to kExitInternal.
class InternalCheckError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::invalid_argument("cannot write '" + path.string() + "'");
  return os;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::invalid_argument("cannot read '" + path.string() + "'");
  return is;
}

fs::path moments_path(const fs::path& dir, int angle_index) {
  return dir / (std::string("moments_") + kStationNames[angle_index] + ".csv");
}

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_config(path);
}

struct SimulateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_trials;
  std::string out;
  bool records = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  RunConfig cfg = config_or_default(a.config);
  if (a.seed) cfg.experiment.seed = *a.seed;
  if (a.n_trials) cfg.experiment.n_trials = *a.n_trials;
  try {
    cfg.experiment.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (calibrated_conventions() != kGateConventions) {
    throw InternalCheckError("gate sign calibration does not reproduce the shipped conventions");
  }
  const fs::path dir = a.out.empty() ? fs::path(cfg.output_dir) : fs::path(a.out);
  const std::uint64_t seed = cfg.experiment.seed;

  const HomodyneRecordSet records = run_experiment(cfg.experiment, seed);
  const MomentEstimate moments = estimate_moments(records);
  out << "config_hash=" << records.config_hash << " seed=" << seed << '\n';
  for (int a_idx = 0; a_idx < 3; ++a_idx) {
    const fs::path path = moments_path(dir, a_idx);
    std::ofstream os = open_output(path);
    write_moments_csv(os, moments, a_idx);
    out << "wrote " << path.string() << '\n';
    if (a.records) {
      const fs::path rpath =
          dir / (std::string("records_") + kStationNames[a_idx] + ".csv");
      std::ofstream rs = open_output(rpath);
      write_records_csv(rs, records, a_idx);
      out << "wrote " << rpath.string() << '\n';
    }
  }
  return kExitOk;
}

struct AnalyzeArgs {
  std::vector<std::string> files;
  std::string in;
  std::string out;
  std::string config;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  std::vector<fs::path> paths;
  if (!a.files.empty()) {
    if (a.files.size() != 3) {
      throw std::invalid_argument("analyze: expected three moment files (x, p, pi4)");
    }
    for (const auto& f : a.files) paths.emplace_back(f);
  } else {
    const fs::path dir = a.in.empty() ? fs::path(".") : fs::path(a.in);
    for (int i = 0; i < 3; ++i) paths.push_back(moments_path(dir, i));
  }
  std::array<MomentFile, 3> files;
  for (int i = 0; i < 3; ++i) {
    std::ifstream is = open_input(paths[i]);
    try {
      files[i] = read_moments_csv(is);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(paths[i].string() + ": " + e.what());
    }
  }
  const MomentEstimate moments = assemble_moments(files);

  std::optional<TheoryTraces> theory;
  if (!a.config.empty()) theory = theory_traces(load_config(a.config).experiment);
  const Summary summary = summarize(moments, theory ? &*theory : nullptr);

  const fs::path dir = a.out.empty() ? fs::path(".") : fs::path(a.out);
  const fs::path path = dir / "summary.csv";
  std::ofstream os = open_output(path);
  write_summary_csv(os, summary.bins);
  out << "wrote " << path.string() << '\n';

  int valid = 0;
  double max_plus = -1e300, min_minus = 1e300;
  for (const VarianceSummary& s : summary.bins) {
    if (!s.valid) continue;
    ++valid;
    max_plus = std::max(max_plus, s.sigma_plus2_db());
    min_minus = std::min(min_minus, s.sigma_minus2_db());
  }
  out << "valid_bins=" << valid << '/' << summary.bins.size() << '\n';
  if (valid > 0) {
    out << "max_antisqueezing_db=" << format_number(max_plus)
        << " max_squeezing_db=" << format_number(min_minus) << '\n';
    out << "note: lossless model; propagation loss, detector inefficiency and phase "
           "jitter are not simulated, so measured squeezing can deviate from these "
           "values\n";
  }
  if (theory) {
    const fs::path rpath = dir / "residuals.csv";
    std::ofstream rs = open_output(rpath);
    write_csv_row(rs, {"bin_index", "mean_x", "mean_p", "mean_pi4", "sigma_x2", "sigma_p2",
                       "sigma_pi4_2", "sigma_xp", "sigma_plus2", "sigma_minus2"});
    for (std::size_t b = 0; b < summary.residuals.size(); ++b) {
      const BinResidual& r = summary.residuals[b];
      write_csv_row(rs, {std::to_string(b), format_number(r.mean_x), format_number(r.mean_p),
                         format_number(r.mean_pi4), format_number(r.sigma_x2),
                         format_number(r.sigma_p2), format_number(r.sigma_pi4_2),
                         format_number(r.sigma_xp), format_number(r.sigma_plus2),
                         format_number(r.sigma_minus2)});
    }
    out << "wrote " << rpath.string() << '\n';
  }
  return kExitOk;
}

int cmd_theory(const std::string& config, const std::string& out_dir, std::ostream& out) {
  const RunConfig cfg = config_or_default(config);
  const fs::path dir = out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(out_dir);
  const fs::path path = dir / "theory.csv";
  std::ofstream os = open_output(path);
  write_theory_csv(os, theory_traces(cfg.experiment));
  out << "wrote " << path.string() << '\n';
  return kExitOk;
}

struct CircuitsArgs {
  std::string target;
  int segments = 16;
  std::vector<double> range{-2.0, 2.0};
  std::string method = "minimax";
  std::string out;
  int grid = 10001;
};

int cmd_circuits(const CircuitsArgs& a, std::ostream& out) {
  const PwlTarget target = parse_target(a.target);
  FitMethod method;
  if (a.method == "minimax") {
    method = FitMethod::kMinimax;
  } else if (a.method == "uniform") {
    method = FitMethod::kUniform;
  } else {
    throw std::invalid_argument("circuits: --method must be minimax or uniform");
  }
  if (a.range.size() != 2 || !(a.range[0] < a.range[1])) {
    throw std::invalid_argument("circuits: --range needs LO HI with LO < HI");
  }
  if (a.grid < 1000) throw std::invalid_argument("circuits: --grid must be >= 1000");
  const PiecewiseLinearFunction f = fit_pwl(target, a.segments, a.range[0], a.range[1], method);
  const double err = max_error(f, target, a.range[0], a.range[1], a.grid);

  std::ostringstream report;
  report << "target=" << target_name(target) << " segments=" << a.segments << " range=["
         << format_number(a.range[0]) << ',' << format_number(a.range[1]) << "] method="
         << a.method << " grid=" << a.grid << " max_error=" << format_number(err);
  if (a.out.empty()) {
    write_pwl_table(out, f);
    out << "# " << report.str() << '\n';
  } else {
    fs::path path(a.out);
    if (fs::is_directory(path)) {
      path /= "pwl_" + std::string(target_name(target)) + "_" + std::to_string(a.segments) + ".txt";
    }
    std::ofstream os = open_output(path);
    write_pwl_table(os, f);
    out << report.str() << '\n' << "wrote " << path.string() << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dynamic squeezing gate simulator", "dsgsim"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo run of the three-angle experiment");
  simulate->add_option("--config", sim.config, "JSON run configuration");
  simulate->add_option("--seed", sim.seed, "Override the configured seed");
  simulate->add_option("--n-trials", sim.n_trials, "Override the trial count per angle");
  simulate->add_option("--out", sim.out, "Output directory");
  simulate->add_flag("--records", sim.records, "Also write raw outcome records");

  AnalyzeArgs ana;
  auto* analyze = app.add_subcommand("analyze", "Reconstruct and diagonalize variance matrices");
  analyze->add_option("files", ana.files, "moments_x.csv moments_p.csv moments_pi4.csv");
  analyze->add_option("--in", ana.in, "Directory holding moments_{x,p,pi4}.csv");
  analyze->add_option("--out", ana.out, "Output directory");
  analyze->add_option("--config", ana.config, "Config for theory residuals");

  std::string theory_config, theory_out;
  auto* theory = app.add_subcommand("theory", "Closed-form predictions per bin");
  theory->add_option("--config", theory_config, "JSON run configuration");
  theory->add_option("--out", theory_out, "Output directory");

  CircuitsArgs circ;
  auto* circuits = app.add_subcommand("circuits", "Fit a broken-line look-up table");
  circuits->add_option("target", circ.target, "arctan | sqrt1px2")->required();
  circuits->add_option("--segments", circ.segments, "Number of segments");
  circuits->add_option("--range", circ.range, "LO HI")->expected(2);
  circuits->add_option("--method", circ.method, "minimax | uniform");
  circuits->add_option("--grid", circ.grid, "Error evaluation grid points");
  circuits->add_option("--out", circ.out, "Output file or directory");

  std::vector<std::string> argv_storage{"dsgsim"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (*simulate) return cmd_simulate(sim, out);
    if (*analyze) return cmd_analyze(ana, out);
    if (*theory) return cmd_theory(theory_config, theory_out, out);
    if (*circuits) return cmd_circuits(circ, out);
  } catch (const InternalCheckError& e) {
    err << "internal check failed: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitBadInput;
}

}  // namespace dsg
