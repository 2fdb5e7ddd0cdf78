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

#pragma once

// Time-series experiment: a control waveform kappa(t) drives the gate while
// x-displaced coherent inputs stream through it; the output is sampled by a
// fixed-angle homodyne station at x, p and the pi/4 quadrature.
//
// Each time bin is an independent gate invocation with kappa frozen at the
// bin's sample (quasi-static approximation).

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <string>
#include <vector>

#include "dsg/electronics.hpp"
#include "dsg/gate.hpp"

namespace dsg {

enum class Waveform { kSine, kSquare, kCustom };

struct ControlSignal {
  Waveform waveform = Waveform::kSine;
  double frequency_mhz = 1.0;
  double amplitude = 2.0;  // kappa units; 2 is the circuit validity limit
  double phase = 0.0;      // radians
  double sample_rate_mhz = 100.0;
  std::vector<double> samples;  // kCustom only, one per bin

  double value(int bin) const;
};

struct InputModulation {
  double x_amplitude = 3.0;
  double frequency_mhz = 5.0;
  double p_amplitude = 0.0;

  double x_mean(double time_us) const;
  double p_mean(double time_us) const;
};

struct ElectronicsConfig {
  // Drive the LO phase and gain from fitted broken-line tables instead of
  // the exact functions.
  bool use_pwl = false;
  int arctan_segments = 16;
  int sqrt_segments = 16;
  double range_lo = -2.0;
  double range_hi = 2.0;
  // Delay the LO phase and gain traces by the electronics latency.
  bool model_latency = false;
  DelayModel delays;
};

struct ExperimentConfig {
  ControlSignal control;
  InputModulation input;
  double ancilla_db = -3.1;
  int n_trials = 10851;
  int n_bins = 200;
  std::uint64_t seed = 1;
  double detection_efficiency = 1.0;
  ElectronicsConfig electronics;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  double ancilla_vx() const { return db_to_variance(ancilla_db); }
  double sample_period_ns() const { return 1000.0 / control.sample_rate_mhz; }
};

/// LO-2 angles of the characterization station: x, p, x_{pi/4}.
inline constexpr std::array<double, 3> kStationAngles{0.0, std::numbers::pi / 2,
                                                      std::numbers::pi / 4};
inline constexpr std::array<const char*, 3> kStationNames{"x", "p", "pi4"};

struct Traces {
  std::vector<double> time_us;
  std::vector<double> kappa;
  std::vector<double> input_x_mean;
  std::vector<double> input_p_mean;
};

Traces generate_traces(const ExperimentConfig& cfg);

/// Per-bin gate parameters, including circuit-derived LO phase and gain when
/// the config asks for them.
std::vector<GateParams> bin_gate_params(const ExperimentConfig& cfg,
                                        const Traces& traces);

struct HomodyneRecordSet {
  // outcomes[a](trial, bin) for station angle kStationAngles[a].
  std::array<Eigen::MatrixXd, 3> outcomes;
  std::vector<double> time_us;
  std::vector<double> kappa;
  std::uint64_t seed = 0;
  std::string config_hash;

  int n_trials() const { return static_cast<int>(outcomes[0].rows()); }
  int n_bins() const { return static_cast<int>(outcomes[0].cols()); }
};

/// Seed of the generator used for one (angle, trial) stream.
std::uint64_t derive_seed(std::uint64_t seed, int angle_index, int trial);

HomodyneRecordSet run_experiment(const ExperimentConfig& cfg, std::uint64_t seed);

struct AngleMoments {
  double angle = 0.0;
  std::vector<double> mean;
  std::vector<double> variance;  // unbiased
  std::vector<double> se_mean;   // sqrt(v / n)
  std::vector<double> se_var;    // v sqrt(2 / (n - 1))
};

struct MomentEstimate {
  std::vector<double> time_us;
  std::vector<double> kappa;
  std::array<AngleMoments, 3> angles;  // ordered as kStationAngles
  int n_trials = 0;

  int n_bins() const { return static_cast<int>(time_us.size()); }
};

/// Column-wise moments of an (n_trials x n_bins) outcome block.
AngleMoments estimate_angle_moments(const Eigen::MatrixXd& outcomes, double angle);
MomentEstimate estimate_moments(const HomodyneRecordSet& records);

struct TheoryTraces {
  std::vector<double> time_us;
  std::vector<double> kappa;
  std::vector<double> mean_x, mean_p, mean_pi4;
  std::vector<double> var_x, var_p, var_pi4, cov_xp;
  // 2 Var(p_in) + (kappa^2 / 2) Var(x_in): omits the ancilla contribution.
  std::vector<double> var_p_simplified;

  const std::vector<double>& variance(int angle_index) const;
  const std::vector<double>& mean(int angle_index) const;
};

TheoryTraces theory_traces(const ExperimentConfig& cfg);

/// angle_rad,bin_index,time_us,kappa,mean,variance,se_mean,se_var
void write_moments_csv(std::ostream& os, const MomentEstimate& m, int angle_index);

struct MomentFile {
  std::vector<double> time_us;
  std::vector<double> kappa;
  AngleMoments moments;
};

MomentFile read_moments_csv(std::istream& is);

/// Orders three files by station angle and checks they share one bin grid.
MomentEstimate assemble_moments(const std::array<MomentFile, 3>& files);

/// angle_rad,trial,bin_index,value
void write_records_csv(std::ostream& os, const HomodyneRecordSet& records,
                       int angle_index);

}  // namespace dsg
