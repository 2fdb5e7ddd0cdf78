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

#include "dsg/analysis.hpp"

#include <limits>
#include <ostream>
#include <string>

#include "dsg/csv.hpp"

namespace dsg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double db_or_nan(double v) { return v > 0 ? variance_to_db(v) : kNaN; }

}  // namespace

double VarianceSummary::sigma_x2_db() const { return db_or_nan(sigma_x2); }
double VarianceSummary::sigma_p2_db() const { return db_or_nan(sigma_p2); }
double VarianceSummary::sigma_pi4_2_db() const { return db_or_nan(sigma_pi4_2); }
double VarianceSummary::sigma_plus2_db() const { return db_or_nan(sigma_plus2); }
double VarianceSummary::sigma_minus2_db() const { return db_or_nan(sigma_minus2); }

VarianceSummary summarize_bin(int bin_index, double time_us, double kappa,
                              double sigma_x2, double sigma_p2, double sigma_pi4_2) {
  VarianceSummary s;
  s.bin_index = bin_index;
  s.time_us = time_us;
  s.kappa = kappa;
  s.sigma_x2 = sigma_x2;
  s.sigma_p2 = sigma_p2;
  s.sigma_pi4_2 = sigma_pi4_2;
  s.sigma_xp = sigma_pi4_2 - 0.5 * (sigma_x2 + sigma_p2);
  s.sigma_plus2 = s.sigma_minus2 = s.phi = s.squeezed_axis = kNaN;
  if (!(sigma_x2 > 0) || !(sigma_p2 > 0) || !(sigma_pi4_2 > 0)) return s;
  const Matrix2<double> v = reconstruct_variance_matrix(sigma_x2, sigma_p2, sigma_pi4_2);
  if (!is_positive_definite(v)) return s;
  const Diagonalization<double> d = diagonalize(v);
  s.sigma_plus2 = d.sigma_plus2;
  s.sigma_minus2 = d.sigma_minus2;
  s.phi = d.phi;
  s.squeezed_axis = d.squeezed_axis;
  s.valid = true;
  return s;
}

Summary summarize(const MomentEstimate& moments, const TheoryTraces* theory) {
  const std::size_t n = moments.time_us.size();
  if (moments.kappa.size() != n) {
    throw std::invalid_argument("summarize: kappa trace length does not match the bin grid");
  }
  for (int a = 0; a < 3; ++a) {
    const AngleMoments& am = moments.angles[a];
    if (am.mean.size() != n || am.variance.size() != n) {
      throw std::invalid_argument("summarize: angle " + std::string(kStationNames[a]) +
                                  " does not share the bin grid");
    }
    if (std::abs(am.angle - kStationAngles[a]) > 1e-9) {
      throw std::invalid_argument("summarize: angle slot " + std::string(kStationNames[a]) +
                                  " holds angle " + format_number(am.angle));
    }
  }
  if (theory && (theory->time_us.size() != n || theory->time_us != moments.time_us)) {
    throw std::invalid_argument("summarize: theory and measured bin grids differ");
  }

  Summary out;
  out.bins.reserve(n);
  for (std::size_t b = 0; b < n; ++b) {
    out.bins.push_back(summarize_bin(static_cast<int>(b), moments.time_us[b], moments.kappa[b],
                                     moments.angles[0].variance[b],
                                     moments.angles[1].variance[b],
                                     moments.angles[2].variance[b]));
  }
  if (theory) {
    const std::vector<VarianceSummary> th = summarize_theory(*theory);
    out.residuals.resize(n);
    for (std::size_t b = 0; b < n; ++b) {
      BinResidual& r = out.residuals[b];
      const VarianceSummary& m = out.bins[b];
      r.mean_x = moments.angles[0].mean[b] - theory->mean_x[b];
      r.mean_p = moments.angles[1].mean[b] - theory->mean_p[b];
      r.mean_pi4 = moments.angles[2].mean[b] - theory->mean_pi4[b];
      r.sigma_x2 = m.sigma_x2 - th[b].sigma_x2;
      r.sigma_p2 = m.sigma_p2 - th[b].sigma_p2;
      r.sigma_pi4_2 = m.sigma_pi4_2 - th[b].sigma_pi4_2;
      r.sigma_xp = m.sigma_xp - th[b].sigma_xp;
      r.sigma_plus2 = m.sigma_plus2 - th[b].sigma_plus2;
      r.sigma_minus2 = m.sigma_minus2 - th[b].sigma_minus2;
    }
  }
  return out;
}

std::vector<VarianceSummary> summarize_theory(const TheoryTraces& theory) {
  std::vector<VarianceSummary> bins;
  bins.reserve(theory.time_us.size());
  for (std::size_t b = 0; b < theory.time_us.size(); ++b) {
    bins.push_back(summarize_bin(static_cast<int>(b), theory.time_us[b], theory.kappa[b],
                                 theory.var_x[b], theory.var_p[b], theory.var_pi4[b]));
  }
  return bins;
}

void write_summary_csv(std::ostream& os, const std::vector<VarianceSummary>& bins) {
  write_csv_row(os, {"bin_index", "time_us", "kappa", "sigma_x2", "sigma_p2", "sigma_pi4_2",
                     "sigma_xp", "sigma_plus2_db", "sigma_minus2_db", "phi_rad", "valid"});
  for (const VarianceSummary& s : bins) {
    write_csv_row(os, {std::to_string(s.bin_index), format_number(s.time_us),
                       format_number(s.kappa), format_number(s.sigma_x2),
                       format_number(s.sigma_p2), format_number(s.sigma_pi4_2),
                       format_number(s.sigma_xp), format_number(s.sigma_plus2_db()),
                       format_number(s.sigma_minus2_db()), format_number(s.phi),
                       s.valid ? "1" : "0"});
  }
}

void write_theory_csv(std::ostream& os, const TheoryTraces& theory) {
  const std::vector<VarianceSummary> diag = summarize_theory(theory);
  write_csv_row(os, {"bin_index", "time_us", "kappa", "mean_x", "mean_p", "mean_pi4", "var_x",
                     "var_p", "var_pi4", "cov_xp", "var_p_simplified", "var_x_db", "var_p_db",
                     "sigma_plus2_db", "sigma_minus2_db", "phi_rad"});
  for (std::size_t b = 0; b < theory.time_us.size(); ++b) {
    write_csv_row(os, {std::to_string(b), format_number(theory.time_us[b]),
                       format_number(theory.kappa[b]), format_number(theory.mean_x[b]),
                       format_number(theory.mean_p[b]), format_number(theory.mean_pi4[b]),
                       format_number(theory.var_x[b]), format_number(theory.var_p[b]),
                       format_number(theory.var_pi4[b]), format_number(theory.cov_xp[b]),
                       format_number(theory.var_p_simplified[b]),
                       format_number(variance_to_db(theory.var_x[b])),
                       format_number(variance_to_db(theory.var_p[b])),
                       format_number(diag[b].sigma_plus2_db()),
                       format_number(diag[b].sigma_minus2_db()), format_number(diag[b].phi)});
  }
}

}  // namespace dsg
