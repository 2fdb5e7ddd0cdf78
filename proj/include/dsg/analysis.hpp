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

// Variance-matrix reconstruction from x, p and pi/4 homodyne statistics and
// its diagonalization into squeezed/antisqueezed variances and an angle.

#include <Eigen/Dense>

#include <cmath>
#include <iosfwd>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "dsg/experiment.hpp"

namespace dsg {

template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;

/// V = [[sx2, sxp], [sxp, sp2]] with sxp = s45 - (sx2 + sp2) / 2.
template <typename Scalar>
Matrix2<Scalar> reconstruct_variance_matrix(Scalar sigma_x2, Scalar sigma_p2,
                                            Scalar sigma_pi4_2) {
  if (!(sigma_x2 > 0) || !(sigma_p2 > 0) || !(sigma_pi4_2 > 0)) {
    throw std::invalid_argument("reconstruct_variance_matrix: variances must be > 0");
  }
  const Scalar sxp = sigma_pi4_2 - Scalar(0.5) * (sigma_x2 + sigma_p2);
  Matrix2<Scalar> v;
  v << sigma_x2, sxp, sxp, sigma_p2;
  return v;
}

template <typename Scalar>
bool is_positive_definite(const Matrix2<Scalar>& v) {
  return v(0, 0) > 0 && v(1, 1) > 0 && v(0, 0) * v(1, 1) - v(0, 1) * v(1, 0) > 0;
}

template <typename Scalar = double>
struct Diagonalization {
  Scalar sigma_plus2{};   // antisqueezed (largest) variance
  Scalar sigma_minus2{};  // squeezed (smallest) variance
  // 0.5 * arctan(-2 sxp / (sx2 - sp2)) on the principal branch (-pi/4, pi/4].
  Scalar phi{};
  // Direction of minimal variance in (-pi/2, pi/2]; equals -phi whenever
  // sx2 <= sp2.
  Scalar squeezed_axis{};
};

/// Eigen-decomposition of a 2x2 variance matrix via the closed-form angle.
/// phi = 0 for the isotropic case sx2 == sp2, sxp == 0.
template <typename Scalar>
Diagonalization<Scalar> diagonalize(const Matrix2<Scalar>& v) {
  if (!is_positive_definite(v) || std::abs(v(0, 1) - v(1, 0)) > Scalar(1e-12) * v.cwiseAbs().maxCoeff()) {
    throw std::invalid_argument("diagonalize: matrix is not symmetric positive definite");
  }
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar sx2 = v(0, 0), sp2 = v(1, 1), sxp = v(0, 1);
  Scalar phi = Scalar(0);
  if (sxp != Scalar(0) || sx2 != sp2) {
    phi = Scalar(0.5) * std::atan2(Scalar(-2) * sxp, sx2 - sp2);  // (-pi/2, pi/2]
    if (phi > pi / 4) phi -= pi / 2;
    if (phi <= -pi / 4) phi += pi / 2;
  }
  const Scalar c = std::cos(phi), s = std::sin(phi);
  const Scalar along_perp = sx2 * s * s + sp2 * c * c + Scalar(2) * sxp * s * c;
  const Scalar along_minus_phi = sx2 * c * c + sp2 * s * s - Scalar(2) * sxp * s * c;

  Diagonalization<Scalar> d;
  d.phi = phi;
  if (along_minus_phi <= along_perp) {
    d.sigma_plus2 = along_perp;
    d.sigma_minus2 = along_minus_phi;
    d.squeezed_axis = -phi;
  } else {
    // sx2 > sp2: the principal branch points at the antisqueezed axis.
    d.sigma_plus2 = along_minus_phi;
    d.sigma_minus2 = along_perp;
    d.squeezed_axis = -phi + pi / 2;
    if (d.squeezed_axis > pi / 2) d.squeezed_axis -= pi;
  }
  return d;
}

struct VarianceSummary {
  int bin_index = 0;
  double time_us = 0.0;
  double kappa = 0.0;
  double sigma_x2 = 0.0;
  double sigma_p2 = 0.0;
  double sigma_pi4_2 = 0.0;
  double sigma_xp = 0.0;
  // NaN on invalid bins.
  double sigma_plus2 = 0.0;
  double sigma_minus2 = 0.0;
  double phi = 0.0;
  double squeezed_axis = 0.0;
  bool valid = false;

  double sigma_x2_db() const;
  double sigma_p2_db() const;
  double sigma_pi4_2_db() const;
  double sigma_plus2_db() const;
  double sigma_minus2_db() const;
};

/// Builds one bin; marks it invalid (instead of throwing) when the
/// reconstructed matrix is not positive definite.
VarianceSummary summarize_bin(int bin_index, double time_us, double kappa,
                              double sigma_x2, double sigma_p2, double sigma_pi4_2);

struct BinResidual {
  double mean_x = 0.0, mean_p = 0.0, mean_pi4 = 0.0;
  double sigma_x2 = 0.0, sigma_p2 = 0.0, sigma_pi4_2 = 0.0, sigma_xp = 0.0;
  double sigma_plus2 = 0.0, sigma_minus2 = 0.0;
};

struct Summary {
  std::vector<VarianceSummary> bins;
  std::vector<BinResidual> residuals;  // empty unless theory was supplied
};

/// Per-bin reconstruction; residuals are measured minus theory.
Summary summarize(const MomentEstimate& moments, const TheoryTraces* theory = nullptr);

/// Reconstruction applied to noiseless theory variances.
std::vector<VarianceSummary> summarize_theory(const TheoryTraces& theory);

/// bin_index,time_us,kappa,sigma_x2,sigma_p2,sigma_pi4_2,sigma_xp,
/// sigma_plus2_db,sigma_minus2_db,phi_rad,valid
void write_summary_csv(std::ostream& os, const std::vector<VarianceSummary>& bins);

/// Per-bin theory predictions (means, variances, the simplified p relation
/// and the diagonalized quantities).
void write_theory_csv(std::ostream& os, const TheoryTraces& theory);

}  // namespace dsg
