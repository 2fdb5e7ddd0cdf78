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
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dsg/analysis.hpp"
#include "oracles.hpp"

using namespace dsg;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Matrix2d mat2(double a, double b, double c, double d) {
  Eigen::Matrix2d m;
  m << a, b, c, d;
  return m;
}

double along(const Eigen::Matrix2d& v, double angle) {
  const Eigen::Vector2d u(std::cos(angle), std::sin(angle));
  return u.dot(v * u);
}

Eigen::Matrix2d random_pd(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> e(0.05, 4.0), a(-kPi, kPi);
  const Eigen::Matrix2d r = rotation(a(rng)).matrix();
  return r * Eigen::Vector2d(e(rng), e(rng)).asDiagonal() * r.transpose();
}

MomentEstimate moments_from_theory(const TheoryTraces& th) {
  MomentEstimate m;
  m.time_us = th.time_us;
  m.kappa = th.kappa;
  m.n_trials = 10851;
  for (int a = 0; a < 3; ++a) {
    m.angles[a].angle = kStationAngles[a];
    m.angles[a].mean = th.mean(a);
    m.angles[a].variance = th.variance(a);
    m.angles[a].se_mean.assign(th.time_us.size(), 0.0);
    m.angles[a].se_var.assign(th.time_us.size(), 0.0);
  }
  return m;
}

}  // namespace

TEST_CASE("reconstruct variance matrix") {
  CHECK((reconstruct_variance_matrix(0.5, 0.5, 0.5) - 0.5 * Eigen::Matrix2d::Identity())
            .cwiseAbs()
            .maxCoeff() == 0.0);
  // Inputs are given to five decimals.
  CHECK(std::abs(reconstruct_variance_matrix(0.37247, 2.48988, 1.68624)(0, 1) - 0.25506) < 1e-5);
  CHECK(std::abs(reconstruct_variance_matrix(0.37247, 1.0, 0.68624)(0, 1)) < 1e-5);

  // Forward quadratic form at pi/4, then back.
  const Eigen::Matrix2d v = mat2(0.37247, 0.25506, 0.25506, 2.48988);
  CHECK(std::abs(along(v, kPi / 4) - 1.68624) < 1e-5);
  CHECK((reconstruct_variance_matrix(v(0, 0), v(1, 1), along(v, kPi / 4)) - v)
            .cwiseAbs()
            .maxCoeff() < 1e-12);

  CHECK_THROWS_AS(reconstruct_variance_matrix(0.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(reconstruct_variance_matrix(1.0, -1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(reconstruct_variance_matrix(1.0, 1.0, std::nan("")), std::invalid_argument);
}

TEST_CASE("diagonalize examples") {
  const auto iso = diagonalize<double>(0.5 * Eigen::Matrix2d::Identity());
  CHECK(iso.sigma_plus2 == 0.5);
  CHECK(iso.sigma_minus2 == 0.5);
  CHECK(iso.phi == 0.0);

  const Eigen::Matrix2d v2 = mat2(0.37247, 0.25506, 0.25506, 2.48988);
  const auto d = diagonalize<double>(v2);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(v2);
  CHECK(std::abs(d.sigma_plus2 - es.eigenvalues()(1)) < 1e-12);
  CHECK(std::abs(d.sigma_minus2 - es.eigenvalues()(0)) < 1e-12);
  CHECK(d.sigma_plus2 == Approx(2.520174).epsilon(1e-6));
  CHECK(d.sigma_minus2 == Approx(0.342176).epsilon(1e-5));
  // Published figures for this matrix (2.52031, 0.34204) sit 1.4e-4 away.
  CHECK(std::abs(d.sigma_plus2 - 2.52031) < 2e-4);
  CHECK(std::abs(d.sigma_minus2 - 0.34204) < 2e-4);
  CHECK(variance_to_db(d.sigma_plus2) == Approx(7.03).epsilon(1e-3));
  CHECK(variance_to_db(d.sigma_minus2) == Approx(-1.65).epsilon(3e-3));
  CHECK(d.phi == Approx(0.11819).epsilon(1e-4));
  CHECK(d.squeezed_axis == Approx(-d.phi));
  CHECK(along(mat2(0.37247, 0.25506, 0.25506, 2.48988), -d.phi) ==
        Approx(d.sigma_minus2).epsilon(1e-12));

  const auto s = diagonalize<double>(0.5 * mat2(1, 2, 2, 5));
  CHECK(s.sigma_plus2 == Approx((3 + 2 * std::numbers::sqrt2) / 2).epsilon(1e-12));
  CHECK(s.sigma_minus2 == Approx((3 - 2 * std::numbers::sqrt2) / 2).epsilon(1e-12));

  CHECK_THROWS_AS(diagonalize<double>(mat2(1, 2, 2, 1)), std::invalid_argument);
  CHECK_THROWS_AS(diagonalize<double>(mat2(1, 0.1, 0.2, 1)), std::invalid_argument);
}

TEST_CASE("diagonalize agrees with a symmetric eigensolver") {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Matrix2d v = random_pd(rng);
    const auto d = diagonalize<double>(v);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(v);
    CHECK(std::abs(d.sigma_minus2 - es.eigenvalues()(0)) < 1e-10);
    CHECK(std::abs(d.sigma_plus2 - es.eigenvalues()(1)) < 1e-10);
    CHECK(d.sigma_plus2 >= d.sigma_minus2);
    CHECK(d.sigma_minus2 > 0);
    CHECK(std::abs(d.sigma_plus2 + d.sigma_minus2 - v.trace()) < 1e-9);
    CHECK(std::abs(d.sigma_plus2 * d.sigma_minus2 - v.determinant()) < 1e-9);
    CHECK(d.phi > -kPi / 4);
    CHECK(d.phi <= kPi / 4);
    CHECK(std::abs(along(v, d.squeezed_axis) - d.sigma_minus2) < 1e-10);
    if (v(0, 0) <= v(1, 1)) CHECK(d.squeezed_axis == Approx(-d.phi));
  }
}

TEST_CASE("diagonalize agrees with a brute-force angle scan") {
  std::mt19937_64 rng(13);
  const int n = 10000;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Matrix2d v = random_pd(rng);
    const auto d = diagonalize<double>(v);
    const auto scan = oracle::scan_quadratic_form(v, n);
    CHECK(std::abs(scan.min_value - d.sigma_minus2) < 1e-6 * std::max(1.0, d.sigma_plus2));
    CHECK(std::abs(scan.max_value - d.sigma_plus2) < 1e-6 * std::max(1.0, d.sigma_plus2));
    if (d.sigma_plus2 - d.sigma_minus2 > 1e-3) {
      CHECK(oracle::angle_distance_mod_pi(scan.argmin, d.squeezed_axis) <= kPi / n);
    }
  }
}

TEST_CASE("three-angle reconstruction recovers random covariances") {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 200; ++i) {
    const auto s = oracle::random_state(1, rng);
    const Eigen::Matrix2d v = reconstruct_variance_matrix(
        quadrature_variance(s, 0, kStationAngles[0]), quadrature_variance(s, 0, kStationAngles[1]),
        quadrature_variance(s, 0, kStationAngles[2]));
    CHECK((v - Eigen::Matrix2d(s.cov())).cwiseAbs().maxCoeff() <
          1e-10 * std::max(1.0, s.cov().cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("non positive definite bins are flagged invalid") {
  // sigma_xp = 2 - 1 = 1 > sqrt(0.5 * 0.5).
  const VarianceSummary bad = summarize_bin(3, 0.1, 1.0, 0.5, 0.5, 1.5);
  CHECK_FALSE(bad.valid);
  CHECK(std::isnan(bad.sigma_plus2));
  CHECK(std::isnan(bad.sigma_minus2_db()));
  CHECK(bad.sigma_xp == 1.0);

  const VarianceSummary neg = summarize_bin(0, 0.0, 0.0, -0.1, 0.5, 0.5);
  CHECK_FALSE(neg.valid);

  const VarianceSummary ok = summarize_bin(1, 0.0, 0.0, 0.5, 0.5, 0.5);
  CHECK(ok.valid);
  CHECK(ok.sigma_plus2_db() == 0.0);
}

TEST_CASE("summarize noiseless theory data") {
  const ExperimentConfig cfg;
  const TheoryTraces th = theory_traces(cfg);
  const MomentEstimate m = moments_from_theory(th);
  const Summary s = summarize(m, &th);
  REQUIRE(s.bins.size() == 200);
  REQUIRE(s.residuals.size() == 200);
  for (std::size_t b = 0; b < s.bins.size(); ++b) {
    const BinResidual& r = s.residuals[b];
    for (double v : {r.mean_x, r.mean_p, r.mean_pi4, r.sigma_x2, r.sigma_p2, r.sigma_pi4_2,
                     r.sigma_xp, r.sigma_plus2, r.sigma_minus2}) {
      CHECK(std::abs(v) < 1e-9);
    }
    const VarianceSummary& v = s.bins[b];
    CHECK(v.valid);
    CHECK(std::abs(v.sigma_plus2 + v.sigma_minus2 - (v.sigma_x2 + v.sigma_p2)) < 1e-9);
    CHECK(std::abs(v.sigma_plus2 * v.sigma_minus2 -
                   (v.sigma_x2 * v.sigma_p2 - v.sigma_xp * v.sigma_xp)) < 1e-9);
    CHECK(std::abs(v.sigma_xp - th.cov_xp[b]) < 1e-9);
  }

  CHECK(s.bins[0].sigma_plus2_db() == Approx(3.01).epsilon(1e-3));
  CHECK(s.bins[0].sigma_minus2_db() == Approx(-1.28).epsilon(5e-3));
  CHECK(s.bins[25].sigma_plus2_db() == Approx(7.0).epsilon(0.01));
  CHECK(s.bins[75].sigma_plus2_db() == Approx(7.0).epsilon(0.01));
}

TEST_CASE("squeezing angle alternates with the sign of kappa") {
  const TheoryTraces th = theory_traces(ExperimentConfig{});
  const auto bins = summarize_theory(th);
  int checked = 0;
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const double k = th.kappa[b];
    if (std::abs(k) <= 0.1) continue;
    ++checked;
    const double sign = k > 0 ? 1.0 : -1.0;
    CHECK(bins[b].phi * sign > 0);
    CHECK(bins[b].squeezed_axis * sign < 0);
  }
  CHECK(checked > 150);
}

TEST_CASE("summarize rejects inconsistent inputs") {
  const TheoryTraces th = theory_traces(ExperimentConfig{});
  MomentEstimate m = moments_from_theory(th);
  MomentEstimate shorter = m;
  shorter.angles[2].variance.pop_back();
  CHECK_THROWS_AS(summarize(shorter), std::invalid_argument);

  MomentEstimate swapped = m;
  std::swap(swapped.angles[1], swapped.angles[2]);
  CHECK_THROWS_AS(summarize(swapped), std::invalid_argument);

  TheoryTraces shifted = th;
  shifted.time_us[4] += 1e-3;
  CHECK_THROWS_AS(summarize(m, &shifted), std::invalid_argument);
  CHECK(summarize(m).residuals.empty());
}

TEST_CASE("summary and theory CSV headers") {
  const TheoryTraces th = theory_traces(ExperimentConfig{});
  std::stringstream summary, theory;
  write_summary_csv(summary, summarize_theory(th));
  write_theory_csv(theory, th);
  std::string line;
  std::getline(summary, line);
  CHECK(line ==
        "bin_index,time_us,kappa,sigma_x2,sigma_p2,sigma_pi4_2,sigma_xp,sigma_plus2_db,"
        "sigma_minus2_db,phi_rad,valid");
  std::getline(summary, line);
  CHECK(line.substr(0, 4) == "0,0,");
  CHECK(line.back() == '1');
  std::getline(theory, line);
  CHECK(line.substr(0, 22) == "bin_index,time_us,kapp");
  int rows = 0;
  while (std::getline(theory, line)) ++rows;
  CHECK(rows == 200);
}

TEST_CASE("long double diagonalization") {
  Matrix2<long double> v;
  v << 0.37247L, 0.25506L, 0.25506L, 2.48988L;
  const auto d = diagonalize(v);
  CHECK(static_cast<double>(d.sigma_plus2) == Approx(2.520174).epsilon(1e-6));
  CHECK(static_cast<double>(d.phi) == Approx(0.11819).epsilon(1e-4));
}
