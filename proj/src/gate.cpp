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

#include "dsg/gate.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dsg {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kCalibrationTolerance = 1e-9;

}  // namespace

void GateParams::validate() const {
  if (!std::isfinite(kappa)) throw std::invalid_argument("GateParams: kappa must be finite");
  if (!(ancilla_vx > 0.0) || !std::isfinite(ancilla_vx)) {
    throw std::invalid_argument("GateParams: ancilla_vx must be > 0");
  }
  if (feedforward_sign != 1 && feedforward_sign != -1) {
    throw std::invalid_argument("GateParams: feedforward_sign must be +1 or -1");
  }
  if (feedforward_gain_override && !std::isfinite(*feedforward_gain_override)) {
    throw std::invalid_argument("GateParams: non-finite gain override");
  }
  if (lo_phase_override && !std::isfinite(*lo_phase_override)) {
    throw std::invalid_argument("GateParams: non-finite LO phase override");
  }
  if (!(detection_efficiency > 0.0 && detection_efficiency <= 1.0)) {
    throw std::invalid_argument("GateParams: detection_efficiency must be in (0, 1]");
  }
}

double GateParams::feedforward_gain() const {
  return feedforward_gain_override.value_or(std::sqrt(1.0 + kappa * kappa));
}

double GateParams::lo_phase() const {
  return lo_phase_override.value_or(std::atan(kappa));
}

SymplecticTransformd ideal_shear_map(double kappa) { return shear(kappa); }

SymplecticTransformd ShearDecomposition::tilted_from_factors() const {
  const double r = -std::log(squeeze_factors.first);
  return rotation(-kPi / 4) * squeeze(r) * rotation(kPi / 4);
}

SymplecticTransformd ShearDecomposition::recompose() const {
  return outer_rotation * tilted_squeeze * outer_rotation;
}

ShearDecomposition decompose_shear(double kappa) {
  if (!std::isfinite(kappa)) throw std::invalid_argument("decompose_shear: non-finite kappa");
  ShearDecomposition d;
  d.lambda = 0.5 * std::atan(0.5 * kappa);
  const double sec2 = 1.0 / std::cos(2.0 * d.lambda);
  const double tan2 = std::tan(2.0 * d.lambda);
  d.outer_rotation = rotation(d.lambda);
  Mat<double> t(2, 2);
  t << sec2, tan2, tan2, sec2;
  d.tilted_squeeze = SymplecticTransformd(std::move(t));
  d.squeeze_factors = {sec2 - tan2, sec2 + tan2};
  return d;
}

GaussianStated closed_form_output(const GaussianStated& input,
                                  const GateParams& params) {
  if (input.n_modes() != 1) {
    throw std::invalid_argument("closed_form_output: input must be single-mode, got " +
                                std::to_string(input.n_modes()) + " modes");
  }
  params.validate();
  const double k = params.kappa;
  const double vs = params.ancilla_vx;
  const double xin = input.mean()(0), pin = input.mean()(1);
  const double vx = input.cov()(0, 0), vp = input.cov()(1, 1);
  const double cxp = input.cov()(0, 1);
  const double s2 = std::numbers::sqrt2;

  Vec<double> mean(2);
  mean << xin / s2, s2 * pin + (k / s2) * xin;
  Mat<double> cov(2, 2);
  cov(0, 0) = 0.5 * (vx + vs);
  cov(1, 1) = 2.0 * vp + 0.5 * k * k * vx + 0.5 * k * k * vs + 2.0 * k * cxp;
  cov(0, 1) = cov(1, 0) = 0.5 * k * (vx - vs) + cxp;
  return GaussianStated(std::move(mean), std::move(cov));
}

GateChannel::GateChannel(const GaussianStated& input, const GateParams& params,
                         const SignConventions& conventions) {
  if (input.n_modes() != 1) {
    throw std::invalid_argument("GateChannel: input must be single-mode");
  }
  params.validate();
  // Mode 0: input, mode 1: ancilla. After the coupler mode 0 is measured and
  // mode 1 is kept.
  GaussianStated joint = tensor(input, make_squeezed_vacuum(params.ancilla_vx));
  joint = apply(joint, beamsplitter(0.5, conventions.beamsplitter));
  if (params.detection_efficiency < 1.0) {
    joint = pure_loss(joint, 0, params.detection_efficiency);
  }
  const double theta = conventions.lo_angle * params.lo_phase();
  conditional_ = homodyne_condition(joint, 0, kPi / 2 - theta);
  feedforward_ = conventions.feedforward * params.feedforward_sign *
                 params.feedforward_gain();
}

Vec<double> GateChannel::mean_slope() const {
  Vec<double> slope = conditional_.gain;
  slope(1) += feedforward_;
  return slope;
}

GaussianStated GateChannel::conditional_output(double outcome) const {
  Vec<double> mean = conditional_.mean_given(outcome);
  mean(1) += feedforward_ * outcome;
  return GaussianStated(std::move(mean), conditional_.kept_cov);
}

GaussianStated GateChannel::averaged_output() const {
  // Mixture of equal-covariance Gaussians whose mean is affine in the outcome.
  const Vec<double> slope = mean_slope();
  Mat<double> cov = conditional_.kept_cov +
                    outcome_variance() * slope * slope.transpose();
  return GaussianStated(conditional_output(outcome_mean()).mean(),
                        0.5 * (cov + cov.transpose()));
}

std::vector<SignConventions> matching_conventions(std::span<const double> kappas) {
  // Displaced, slightly correlated input so both means and covariances
  // discriminate conventions.
  const GaussianStated input = apply(make_coherent(1.5, -0.7), squeeze(0.2) * rotation(0.3));
  std::vector<SignConventions> matches;
  for (int bs : {1, -1}) {
    for (int lo : {1, -1}) {
      for (int ff : {1, -1}) {
        const SignConventions conv{bs, lo, ff};
        bool ok = true;
        for (double k : kappas) {
          GateParams params;
          params.kappa = k;
          const GaussianStated sim = GateChannel(input, params, conv).averaged_output();
          const GaussianStated ref = closed_form_output(input, params);
          const double err = std::max((sim.mean() - ref.mean()).cwiseAbs().maxCoeff(),
                                      (sim.cov() - ref.cov()).cwiseAbs().maxCoeff());
          if (err > kCalibrationTolerance) {
            ok = false;
            break;
          }
        }
        if (ok) matches.push_back(conv);
      }
    }
  }
  return matches;
}

SignConventions calibrate_signs() {
  static constexpr std::array<double, 5> kGrid{-2.0, -1.0, 0.0, 1.0, 2.0};
  const std::vector<SignConventions> matches = matching_conventions(kGrid);
  if (matches.size() != 1) {
    throw std::logic_error("calibrate_signs: expected exactly one matching convention, found " +
                           std::to_string(matches.size()));
  }
  return matches.front();
}

const SignConventions& calibrated_conventions() {
  static const SignConventions conventions = calibrate_signs();
  return conventions;
}

}  // namespace dsg
