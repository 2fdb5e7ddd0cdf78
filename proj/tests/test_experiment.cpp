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

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "dsg/experiment.hpp"

using namespace dsg;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

// Two control periods at 10 bins each.
ExperimentConfig coarse_config(int n_trials) {
  ExperimentConfig cfg;
  cfg.control.sample_rate_mhz = 10.0;
  cfg.n_bins = 20;
  cfg.n_trials = n_trials;
  return cfg;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / a.size();
    mb += b[i] / b.size();
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("default traces") {
  const ExperimentConfig cfg;
  CHECK(cfg.n_trials == 10851);
  const Traces t = generate_traces(cfg);
  REQUIRE(t.kappa.size() == 200);
  CHECK(t.time_us.back() * cfg.control.frequency_mhz >= 1.99 - 1e-12);
  CHECK(t.time_us[1] == Approx(0.01));

  int zeros = 0;
  double peak = 0.0;
  for (double k : t.kappa) {
    if (std::abs(k) < 1e-12) ++zeros;
    peak = std::max(peak, std::abs(k));
    CHECK(std::abs(k) <= 2.0);
  }
  CHECK(zeros >= 2);
  CHECK(peak == 2.0);
  CHECK(t.kappa[25] == 2.0);
  CHECK(t.kappa[75] == -2.0);

  // Five input cycles per control cycle: five rising starts over 100 bins.
  int rising = 0;
  for (int b = 1; b <= 100; ++b) {
    if (t.input_x_mean[b - 1] <= 1e-9 && t.input_x_mean[b] > 1e-9) ++rising;
  }
  CHECK(rising == 5);
  for (double p : t.input_p_mean) CHECK(p == 0.0);
  double xpeak = 0.0;
  for (double x : t.input_x_mean) xpeak = std::max(xpeak, std::abs(x));
  CHECK(xpeak == Approx(3.0).epsilon(1e-9));
}

TEST_CASE("waveforms") {
  ExperimentConfig cfg;
  cfg.control.waveform = Waveform::kSquare;
  const Traces sq = generate_traces(cfg);
  CHECK(sq.kappa[0] == 0.0);
  CHECK(sq.kappa[10] == 2.0);
  CHECK(sq.kappa[60] == -2.0);

  cfg.control.waveform = Waveform::kCustom;
  cfg.control.samples.assign(200, 0.5);
  CHECK(generate_traces(cfg).kappa[123] == 0.5);
  cfg.control.samples[3] = 2.5;
  CHECK_THROWS_AS(generate_traces(cfg), std::invalid_argument);
  cfg.control.samples.resize(10);
  CHECK_THROWS_AS(generate_traces(cfg), std::invalid_argument);
}

TEST_CASE("config validation names the field") {
  ExperimentConfig cfg;
  cfg.control.sample_rate_mhz = 0.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("control.sample_rate_mhz"),
                       std::invalid_argument);
  cfg = ExperimentConfig{};
  cfg.n_bins = 150;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("two control periods"),
                       std::invalid_argument);
  cfg = ExperimentConfig{};
  cfg.n_trials = 1;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("n_trials"), std::invalid_argument);
  cfg = ExperimentConfig{};
  cfg.detection_efficiency = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = ExperimentConfig{};
  cfg.electronics.range_lo = 3.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("electronics.range"),
                       std::invalid_argument);
}

TEST_CASE("sub-seeds are distinct across angles and trials") {
  std::set<std::uint64_t> seen;
  for (int a = 0; a < 3; ++a) {
    for (int t = 0; t < 1000; ++t) seen.insert(derive_seed(42, a, t));
  }
  CHECK(seen.size() == 3000);
  CHECK(derive_seed(42, 1, 7) == derive_seed(42, 1, 7));
  CHECK(derive_seed(42, 1, 7) != derive_seed(43, 1, 7));
}

TEST_CASE("vacuum input with kappa held at zero") {
  ExperimentConfig cfg = coarse_config(4000);
  cfg.control.amplitude = 0.0;
  cfg.input.x_amplitude = 0.0;
  cfg.ancilla_db = variance_to_db(0.24494);
  const MomentEstimate m = estimate_moments(run_experiment(cfg, 7));
  for (int b = 0; b < m.n_bins(); ++b) {
    for (int a = 0; a < 3; ++a) CHECK(std::abs(m.angles[a].mean[b]) < 4 * m.angles[a].se_mean[b]);
    CHECK(std::abs(m.angles[0].variance[b] - 0.37247) < 4 * m.angles[0].se_var[b]);
  }
}

TEST_CASE("record sets are reproducible") {
  const ExperimentConfig cfg = coarse_config(50);
  const HomodyneRecordSet a = run_experiment(cfg, 9);
  const HomodyneRecordSet b = run_experiment(cfg, 9);
  const HomodyneRecordSet c = run_experiment(cfg, 10);
  CHECK(a.n_trials() == 50);
  CHECK(a.n_bins() == 20);
  CHECK(a.config_hash.size() == 16);
  CHECK(a.config_hash == c.config_hash);
  for (int k = 0; k < 3; ++k) {
    CHECK((a.outcomes[k].array() == b.outcomes[k].array()).all());
    CHECK_FALSE((a.outcomes[k].array() == c.outcomes[k].array()).all());
  }
  CHECK(a.kappa == b.kappa);
  CHECK(a.time_us == b.time_us);
}

TEST_CASE("moment estimation") {
  Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(10, 3, 1.25);
  const AngleMoments c = estimate_angle_moments(constant, 0.0);
  for (int b = 0; b < 3; ++b) {
    CHECK(c.mean[b] == 1.25);
    CHECK(c.variance[b] == 0.0);
    CHECK(c.se_mean[b] == 0.0);
  }

  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Eigen::MatrixXd samples(100000, 1);
  for (Eigen::Index i = 0; i < samples.rows(); ++i) samples(i, 0) = normal(rng);
  const AngleMoments g = estimate_angle_moments(samples, 0.0);
  CHECK(std::abs(g.variance[0] - 0.5) < 4 * g.se_var[0]);
  CHECK(g.se_mean[0] == Approx(std::sqrt(g.variance[0] / 100000)));
  CHECK(g.se_var[0] == Approx(g.variance[0] * std::sqrt(2.0 / 99999)));

  CHECK_THROWS_AS(estimate_angle_moments(Eigen::MatrixXd::Zero(1, 4), 0.0),
                  std::invalid_argument);
}

TEST_CASE("standard errors scale as one over root n") {
  std::mt19937_64 rng(32);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Eigen::MatrixXd big(10851, 1);
  for (Eigen::Index i = 0; i < big.rows(); ++i) big(i, 0) = normal(rng);
  const AngleMoments full = estimate_angle_moments(big, 0.0);
  const AngleMoments small = estimate_angle_moments(big.topRows(100), 0.0);
  const double ratio = small.se_mean[0] / full.se_mean[0];
  CHECK(ratio == Approx(std::sqrt(10851.0 / 100.0)).epsilon(0.15));
  CHECK(std::sqrt(10851.0 / 100.0) == Approx(10.42).epsilon(1e-3));
}

TEST_CASE("theory traces") {
  const ExperimentConfig cfg;
  const TheoryTraces th = theory_traces(cfg);
  REQUIRE(th.var_x.size() == 200);
  CHECK(variance_to_db(th.var_x[0]) == Approx(-1.28).epsilon(0.005));
  CHECK(variance_to_db(th.var_x[0]) == Approx(-1.3).epsilon(0.02));
  CHECK(th.var_p[25] == Approx(2.48988).epsilon(1e-4));
  CHECK(th.var_p[75] == Approx(2.48988).epsilon(1e-4));
  CHECK(variance_to_db(th.var_p[25]) == Approx(6.97).epsilon(1e-3));
  CHECK(th.var_p_simplified[25] == Approx(2.0));
  CHECK(variance_to_db(th.var_p_simplified[25]) == Approx(6.02).epsilon(1e-3));
  CHECK(th.var_p[25] - th.var_p_simplified[25] == Approx(0.48988).epsilon(1e-4));
  CHECK(th.mean_p[0] == 0.0);
  CHECK(&th.variance(1) == &th.var_p);
  CHECK(&th.mean(2) == &th.mean_pi4);
  CHECK_THROWS_AS(th.variance(3), std::out_of_range);
}

TEST_CASE("p mean follows x mean with the sign of kappa") {
  const TheoryTraces th = theory_traces(ExperimentConfig{});
  std::vector<double> xs_pos, ps_pos, xs_neg, ps_neg;
  for (std::size_t b = 0; b < th.kappa.size(); ++b) {
    if (th.kappa[b] > 0.5) {
      xs_pos.push_back(th.mean_x[b]);
      ps_pos.push_back(th.mean_p[b]);
    } else if (th.kappa[b] < -0.5) {
      xs_neg.push_back(th.mean_x[b]);
      ps_neg.push_back(th.mean_p[b]);
    }
  }
  CHECK(correlation(xs_pos, ps_pos) > 0.9);
  CHECK(correlation(xs_neg, ps_neg) < -0.9);

  ExperimentConfig cfg;
  cfg.n_trials = 300;
  const MomentEstimate m = estimate_moments(run_experiment(cfg, 3));
  std::vector<double> mx_pos, mp_pos, mx_neg, mp_neg;
  for (int b = 0; b < m.n_bins(); ++b) {
    if (m.kappa[b] > 0.5) {
      mx_pos.push_back(m.angles[0].mean[b]);
      mp_pos.push_back(m.angles[1].mean[b]);
    } else if (m.kappa[b] < -0.5) {
      mx_neg.push_back(m.angles[0].mean[b]);
      mp_neg.push_back(m.angles[1].mean[b]);
    }
    if (m.kappa[b] == 0.0) CHECK(std::abs(m.angles[1].mean[b]) < 4 * m.angles[1].se_mean[b]);
  }
  CHECK(correlation(mx_pos, mp_pos) > 0.9);
  CHECK(correlation(mx_neg, mp_neg) < -0.9);
}

TEST_CASE("p variance oscillates at twice the control frequency") {
  const ExperimentConfig cfg;
  const TheoryTraces th = theory_traces(cfg);
  const int n = static_cast<int>(th.var_p.size());
  double mean = 0.0;
  for (double v : th.var_p) mean += v / n;
  int best = 0;
  double best_power = 0.0;
  for (int k = 1; k < n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (int i = 0; i < n; ++i) acc += (th.var_p[i] - mean) * std::polar(1.0, -2 * kPi * k * i / n);
    if (std::norm(acc) > best_power) {
      best_power = std::norm(acc);
      best = k;
    }
  }
  const double duration_us = n / cfg.control.sample_rate_mhz;
  CHECK(best / duration_us == Approx(2.0));
}

TEST_CASE("Monte Carlo variances converge at one over root n") {
  const ExperimentConfig base = coarse_config(1000);
  const TheoryTraces th = theory_traces(base);
  auto rms_error = [&](int n_trials, std::uint64_t seed) {
    ExperimentConfig cfg = base;
    cfg.n_trials = n_trials;
    const MomentEstimate m = estimate_moments(run_experiment(cfg, seed));
    double acc = 0.0;
    int count = 0;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < m.n_bins(); ++b) {
        const double rel = (m.angles[a].variance[b] - th.variance(a)[b]) / th.variance(a)[b];
        acc += rel * rel;
        ++count;
      }
    }
    return std::sqrt(acc / count);
  };
  const double coarse = rms_error(1000, 1);
  const double fine = rms_error(4000, 2);
  CHECK(coarse / fine == Approx(2.0).epsilon(0.3));
  CHECK(coarse == Approx(std::sqrt(2.0 / 999)).epsilon(0.3));
}

TEST_CASE("moment CSV round trip") {
  const ExperimentConfig cfg = coarse_config(30);
  const MomentEstimate m = estimate_moments(run_experiment(cfg, 5));
  std::array<MomentFile, 3> files;
  // Store out of order; assembly sorts by angle.
  for (int a = 0; a < 3; ++a) {
    std::stringstream ss;
    write_moments_csv(ss, m, a);
    if (a == 0) {
      std::string header;
      std::getline(ss, header);
      CHECK(header == "angle_rad,bin_index,time_us,kappa,mean,variance,se_mean,se_var");
      ss.seekg(0);
    }
    files[2 - a] = read_moments_csv(ss);
  }
  const MomentEstimate back = assemble_moments(files);
  CHECK(back.n_trials == 30);
  CHECK(back.time_us == m.time_us);
  CHECK(back.kappa == m.kappa);
  for (int a = 0; a < 3; ++a) {
    CHECK(back.angles[a].angle == m.angles[a].angle);
    CHECK(back.angles[a].mean == m.angles[a].mean);
    CHECK(back.angles[a].variance == m.angles[a].variance);
  }

  files[0].time_us[3] += 1e-3;
  CHECK_THROWS_AS(assemble_moments(files), std::invalid_argument);
  files[0] = files[1];
  CHECK_THROWS_AS(assemble_moments(files), std::invalid_argument);

  std::istringstream bad("angle_rad,bin_index,time_us,kappa,mean,variance,se_mean,se_var\n"
                         "0,1,0,0,0,1,0.1,0.1\n");
  CHECK_THROWS_AS(read_moments_csv(bad), std::invalid_argument);
}

TEST_CASE("record CSV layout") {
  const HomodyneRecordSet r = run_experiment(coarse_config(2), 5);
  std::stringstream ss;
  write_records_csv(ss, r, 1);
  std::string line;
  int rows = -1;
  while (std::getline(ss, line)) ++rows;
  CHECK(rows == 2 * 20);
}

TEST_CASE("electronics options change the per-bin gate parameters") {
  ExperimentConfig cfg;
  const Traces t = generate_traces(cfg);
  const auto exact = bin_gate_params(cfg, t);
  CHECK_FALSE(exact[10].lo_phase_override.has_value());

  cfg.electronics.use_pwl = true;
  const auto pwl = bin_gate_params(cfg, t);
  for (std::size_t b = 0; b < t.kappa.size(); ++b) {
    CHECK(std::abs(*pwl[b].lo_phase_override - std::atan(t.kappa[b])) <= 0.01);
    CHECK(std::abs(*pwl[b].feedforward_gain_override - exact[b].feedforward_gain()) <= 0.005);
  }

  cfg.electronics.use_pwl = false;
  cfg.electronics.model_latency = true;
  cfg.electronics.delays.electronics_latency_ns = 10.0;  // one bin at 100 MHz
  const auto late = bin_gate_params(cfg, t);
  for (std::size_t b = 1; b < t.kappa.size(); ++b) {
    CHECK(*late[b].lo_phase_override == Approx(std::atan(t.kappa[b - 1])));
  }
}
