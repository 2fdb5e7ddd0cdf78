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

#include "dsg/experiment.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "dsg/config.hpp"
#include "dsg/csv.hpp"

namespace dsg {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw std::invalid_argument("field '" + field + "': " + what);
}

}  // namespace

double ControlSignal::value(int bin) const {
  const double t_us = bin / sample_rate_mhz;
  const double s = std::sin(kTwoPi * frequency_mhz * t_us + phase);
  switch (waveform) {
    case Waveform::kSine:
      return amplitude * s;
    case Waveform::kSquare:
      // Exact zeros of the underlying sine stay at zero.
      return std::abs(s) < 1e-12 ? 0.0 : (s > 0 ? amplitude : -amplitude);
    case Waveform::kCustom:
      return samples.at(static_cast<std::size_t>(bin));
  }
  return 0.0;
}

double InputModulation::x_mean(double time_us) const {
  return x_amplitude * std::sin(kTwoPi * frequency_mhz * time_us);
}

double InputModulation::p_mean(double time_us) const {
  return p_amplitude * std::sin(kTwoPi * frequency_mhz * time_us);
}

void ExperimentConfig::validate() const {
  require(std::isfinite(control.sample_rate_mhz) && control.sample_rate_mhz > 0,
          "control.sample_rate_mhz", "must be > 0");
  require(std::isfinite(control.amplitude) && control.amplitude >= 0,
          "control.amplitude", "must be >= 0");
  require(std::isfinite(control.phase), "control.phase_rad", "must be finite");
  require(n_bins >= 1, "n_bins", "must be >= 1");
  require(n_trials >= 2, "n_trials", "must be >= 2");
  if (control.waveform == Waveform::kCustom) {
    require(static_cast<int>(control.samples.size()) == n_bins, "control.samples",
            "custom waveform needs exactly n_bins samples");
    for (double s : control.samples) {
      require(std::isfinite(s) && std::abs(s) <= control.amplitude, "control.samples",
              "every sample must satisfy |sample| <= amplitude");
    }
  } else {
    require(std::isfinite(control.frequency_mhz) && control.frequency_mhz > 0,
            "control.frequency_mhz", "must be > 0");
    const double duration_us = n_bins / control.sample_rate_mhz;
    require(duration_us * control.frequency_mhz >= 2.0 - 1e-9, "n_bins",
            "time grid must cover at least two control periods");
  }
  require(std::isfinite(input.x_amplitude), "input.x_amplitude", "must be finite");
  require(std::isfinite(input.p_amplitude), "input.p_amplitude", "must be finite");
  require(std::isfinite(input.frequency_mhz) && input.frequency_mhz >= 0,
          "input.frequency_mhz", "must be >= 0");
  require(std::isfinite(ancilla_db) && db_to_variance(ancilla_db) >= kMinConditioningVariance,
          "ancilla_db", "must be finite and above -110 dB");
  require(detection_efficiency > 0 && detection_efficiency <= 1, "detection_efficiency",
          "must be in (0, 1]");
  require(electronics.arctan_segments >= 1, "electronics.arctan_segments", "must be >= 1");
  require(electronics.sqrt_segments >= 1, "electronics.sqrt_segments", "must be >= 1");
  require(electronics.range_lo < electronics.range_hi, "electronics.range",
          "need lo < hi");
  require(electronics.delays.optical_delay_ns >= 0, "electronics.optical_delay_ns",
          "must be >= 0");
  require(electronics.delays.electronics_latency_ns >= 0,
          "electronics.electronics_latency_ns", "must be >= 0");
}

Traces generate_traces(const ExperimentConfig& cfg) {
  cfg.validate();
  Traces t;
  t.time_us.resize(cfg.n_bins);
  t.kappa.resize(cfg.n_bins);
  t.input_x_mean.resize(cfg.n_bins);
  t.input_p_mean.resize(cfg.n_bins);
  for (int b = 0; b < cfg.n_bins; ++b) {
    const double time = b / cfg.control.sample_rate_mhz;
    t.time_us[b] = time;
    t.kappa[b] = cfg.control.value(b);
    t.input_x_mean[b] = cfg.input.x_mean(time);
    t.input_p_mean[b] = cfg.input.p_mean(time);
  }
  return t;
}

std::vector<GateParams> bin_gate_params(const ExperimentConfig& cfg,
                                        const Traces& traces) {
  const std::size_t n = traces.kappa.size();
  std::vector<GateParams> params(n);
  for (std::size_t b = 0; b < n; ++b) {
    params[b].kappa = traces.kappa[b];
    params[b].ancilla_vx = cfg.ancilla_vx();
    params[b].detection_efficiency = cfg.detection_efficiency;
  }
  const auto& ec = cfg.electronics;
  if (!ec.use_pwl && !ec.model_latency) return params;

  const double latency = ec.model_latency ? ec.delays.electronics_latency_ns : 0.0;
  ControlElectronics::Drive drive;
  if (ec.use_pwl) {
    const ControlElectronics electronics = ControlElectronics::fitted(
        ec.arctan_segments, ec.sqrt_segments, ec.range_lo, ec.range_hi, latency);
    drive = electronics.drive(traces.kappa, cfg.sample_period_ns());
  } else {
    std::vector<double> phase(n), gain(n);
    for (std::size_t b = 0; b < n; ++b) {
      phase[b] = std::atan(traces.kappa[b]);
      gain[b] = std::sqrt(1.0 + traces.kappa[b] * traces.kappa[b]);
    }
    const SignalChainStage delay{1.0, 0.0, latency};
    drive.lo_phase = apply_chain(phase, std::span(&delay, 1), cfg.sample_period_ns());
    drive.gain = apply_chain(gain, std::span(&delay, 1), cfg.sample_period_ns());
  }
  for (std::size_t b = 0; b < n; ++b) {
    params[b].lo_phase_override = drive.lo_phase[b];
    params[b].feedforward_gain_override = drive.gain[b];
  }
  return params;
}

std::uint64_t derive_seed(std::uint64_t seed, int angle_index, int trial) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(angle_index));
  return splitmix64(h ^ static_cast<std::uint64_t>(trial));
}

HomodyneRecordSet run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  const Traces traces = generate_traces(cfg);
  const std::vector<GateParams> params = bin_gate_params(cfg, traces);

  std::vector<GateChannel> channels;
  channels.reserve(cfg.n_bins);
  for (int b = 0; b < cfg.n_bins; ++b) {
    channels.emplace_back(make_coherent(traces.input_x_mean[b], traces.input_p_mean[b]),
                          params[b]);
  }

  HomodyneRecordSet records;
  records.time_us = traces.time_us;
  records.kappa = traces.kappa;
  records.seed = seed;
  records.config_hash = config_hash(cfg);
  for (int a = 0; a < 3; ++a) {
    Eigen::MatrixXd& out = records.outcomes[a];
    out.resize(cfg.n_trials, cfg.n_bins);
    for (int trial = 0; trial < cfg.n_trials; ++trial) {
      std::mt19937_64 rng(derive_seed(seed, a, trial));
      for (int b = 0; b < cfg.n_bins; ++b) {
        const GateShot shot = channels[b].sample(rng);
        out(trial, b) = sample_quadrature(shot.output, 0, kStationAngles[a], rng);
      }
    }
  }
  return records;
}

AngleMoments estimate_angle_moments(const Eigen::MatrixXd& outcomes, double angle) {
  const Eigen::Index n = outcomes.rows();
  if (n < 2) throw std::invalid_argument("estimate_moments: need at least 2 trials per bin");
  AngleMoments m;
  m.angle = angle;
  const Eigen::Index bins = outcomes.cols();
  m.mean.resize(bins);
  m.variance.resize(bins);
  m.se_mean.resize(bins);
  m.se_var.resize(bins);
  const double dn = static_cast<double>(n);
  for (Eigen::Index b = 0; b < bins; ++b) {
    const double mean = outcomes.col(b).mean();
    const double var = (outcomes.col(b).array() - mean).square().sum() / (dn - 1.0);
    m.mean[b] = mean;
    m.variance[b] = var;
    m.se_mean[b] = std::sqrt(var / dn);
    m.se_var[b] = var * std::sqrt(2.0 / (dn - 1.0));
  }
  return m;
}

MomentEstimate estimate_moments(const HomodyneRecordSet& records) {
  MomentEstimate est;
  est.time_us = records.time_us;
  est.kappa = records.kappa;
  est.n_trials = records.n_trials();
  for (int a = 0; a < 3; ++a) {
    if (records.outcomes[a].cols() != static_cast<Eigen::Index>(records.time_us.size()) ||
        records.outcomes[a].rows() != records.outcomes[0].rows()) {
      throw std::invalid_argument("estimate_moments: angle blocks do not share one bin grid");
    }
    est.angles[a] = estimate_angle_moments(records.outcomes[a], kStationAngles[a]);
  }
  return est;
}

const std::vector<double>& TheoryTraces::variance(int angle_index) const {
  switch (angle_index) {
    case 0:
      return var_x;
    case 1:
      return var_p;
    case 2:
      return var_pi4;
  }
  throw std::out_of_range("TheoryTraces: angle index");
}

const std::vector<double>& TheoryTraces::mean(int angle_index) const {
  switch (angle_index) {
    case 0:
      return mean_x;
    case 1:
      return mean_p;
    case 2:
      return mean_pi4;
  }
  throw std::out_of_range("TheoryTraces: angle index");
}

TheoryTraces theory_traces(const ExperimentConfig& cfg) {
  const Traces traces = generate_traces(cfg);
  TheoryTraces th;
  th.time_us = traces.time_us;
  th.kappa = traces.kappa;
  for (int b = 0; b < cfg.n_bins; ++b) {
    GateParams params;
    params.kappa = traces.kappa[b];
    params.ancilla_vx = cfg.ancilla_vx();
    const GaussianStated input = make_coherent(traces.input_x_mean[b], traces.input_p_mean[b]);
    const GaussianStated out = closed_form_output(input, params);
    th.mean_x.push_back(quadrature_mean(out, 0, kStationAngles[0]));
    th.mean_p.push_back(quadrature_mean(out, 0, kStationAngles[1]));
    th.mean_pi4.push_back(quadrature_mean(out, 0, kStationAngles[2]));
    th.var_x.push_back(out.cov()(0, 0));
    th.var_p.push_back(out.cov()(1, 1));
    th.var_pi4.push_back(quadrature_variance(out, 0, kStationAngles[2]));
    th.cov_xp.push_back(out.cov()(0, 1));
    const double k = traces.kappa[b];
    th.var_p_simplified.push_back(2.0 * input.cov()(1, 1) + 0.5 * k * k * input.cov()(0, 0));
  }
  return th;
}

void write_moments_csv(std::ostream& os, const MomentEstimate& m, int angle_index) {
  const AngleMoments& a = m.angles.at(angle_index);
  write_csv_row(os, {"angle_rad", "bin_index", "time_us", "kappa", "mean", "variance",
                     "se_mean", "se_var"});
  for (int b = 0; b < m.n_bins(); ++b) {
    write_csv_row(os, {format_number(a.angle), std::to_string(b), format_number(m.time_us[b]),
                       format_number(m.kappa[b]), format_number(a.mean[b]),
                       format_number(a.variance[b]), format_number(a.se_mean[b]),
                       format_number(a.se_var[b])});
  }
}

MomentFile read_moments_csv(std::istream& is) {
  const CsvTable table = read_csv(is);
  MomentFile f;
  if (table.rows.empty()) throw std::invalid_argument("moments CSV: no data rows");
  f.moments.angle = table.number(0, "angle_rad");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (table.number(r, "angle_rad") != f.moments.angle) {
      throw std::invalid_argument("moments CSV: row " + std::to_string(r + 2) +
                                  " has a different angle_rad");
    }
    if (table.number(r, "bin_index") != static_cast<double>(r)) {
      throw std::invalid_argument("moments CSV: row " + std::to_string(r + 2) +
                                  " bin_index out of sequence");
    }
    f.time_us.push_back(table.number(r, "time_us"));
    f.kappa.push_back(table.number(r, "kappa"));
    f.moments.mean.push_back(table.number(r, "mean"));
    f.moments.variance.push_back(table.number(r, "variance"));
    f.moments.se_mean.push_back(table.number(r, "se_mean"));
    f.moments.se_var.push_back(table.number(r, "se_var"));
  }
  return f;
}

MomentEstimate assemble_moments(const std::array<MomentFile, 3>& files) {
  MomentEstimate est;
  std::array<bool, 3> seen{false, false, false};
  for (const MomentFile& f : files) {
    int slot = -1;
    for (int a = 0; a < 3; ++a) {
      if (std::abs(f.moments.angle - kStationAngles[a]) < 1e-9) slot = a;
    }
    if (slot < 0) {
      throw std::invalid_argument("moments: angle " + format_number(f.moments.angle) +
                                  " is not one of 0, pi/2, pi/4");
    }
    if (seen[slot]) throw std::invalid_argument("moments: duplicate angle " + std::string(kStationNames[slot]));
    seen[slot] = true;
    if (est.time_us.empty()) {
      est.time_us = f.time_us;
      est.kappa = f.kappa;
    } else if (f.time_us != est.time_us || f.kappa != est.kappa) {
      throw std::invalid_argument("moments: bin grids (time_us/kappa) do not match across angles");
    }
    est.angles[slot] = f.moments;
  }
  // Trial count from the standard error of the first informative bin.
  const AngleMoments& x = est.angles[0];
  for (std::size_t b = 0; b < x.variance.size(); ++b) {
    if (x.se_mean[b] > 0) {
      est.n_trials = static_cast<int>(std::lround(x.variance[b] / (x.se_mean[b] * x.se_mean[b])));
      break;
    }
  }
  return est;
}

void write_records_csv(std::ostream& os, const HomodyneRecordSet& records,
                       int angle_index) {
  const Eigen::MatrixXd& block = records.outcomes.at(angle_index);
  const std::string angle = format_number(kStationAngles[angle_index]);
  write_csv_row(os, {"angle_rad", "trial", "bin_index", "value"});
  for (Eigen::Index t = 0; t < block.rows(); ++t) {
    for (Eigen::Index b = 0; b < block.cols(); ++b) {
      write_csv_row(os, {angle, std::to_string(t), std::to_string(b), format_number(block(t, b))});
    }
  }
}

}  // namespace dsg
