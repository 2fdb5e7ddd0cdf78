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

// Measurement-induced dynamic squeezing gate.
//
// One invocation: the input mode and an x-squeezed ancilla meet on a balanced
// beamsplitter, the first output port is measured by homodyne detection of
// p cos(theta) + x sin(theta) with theta = arctan(kappa), and the second port
// is displaced along p by gain * outcome with gain = sqrt(1 + kappa^2).

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dsg/gaussian.hpp"

namespace dsg {

struct GateParams {
  double kappa = 0.0;
  double ancilla_vx = db_to_variance(-3.1);
  std::optional<double> feedforward_gain_override;
  // Replaces arctan(kappa) as the measurement LO phase (models circuit error).
  std::optional<double> lo_phase_override;
  int feedforward_sign = 1;
  // Pure-loss efficiency in front of the feed-forward homodyne detector.
  double detection_efficiency = 1.0;

  void validate() const;
  double feedforward_gain() const;
  double lo_phase() const;
};

/// Discrete sign conventions of the optical/electronic wiring.
struct SignConventions {
  int beamsplitter = 1;
  int lo_angle = 1;
  int feedforward = 1;

  friend bool operator==(const SignConventions&, const SignConventions&) = default;
};

/// The conventions the gate ships with; calibrate_signs() must reproduce them.
inline constexpr SignConventions kGateConventions{1, 1, 1};

/// Shear x -> x, p -> p + kappa x.
SymplecticTransformd ideal_shear_map(double kappa);

/// shear(kappa) = R(lambda) T(lambda) R(lambda), lambda = arctan(kappa / 2) / 2,
/// with T a squeeze along the pi/4-tilted axes.
struct ShearDecomposition {
  double lambda = 0.0;
  SymplecticTransformd outer_rotation = SymplecticTransformd::identity(1);
  SymplecticTransformd tilted_squeeze = SymplecticTransformd::identity(1);
  // (sec 2l - tan 2l, sec 2l + tan 2l): scaling along the -pi/4 and +pi/4 axes.
  std::pair<double, double> squeeze_factors{1.0, 1.0};

  /// R(-pi/4) diag(factors) R(pi/4), i.e. tilted_squeeze rebuilt from its axes.
  SymplecticTransformd tilted_from_factors() const;
  SymplecticTransformd recompose() const;
};

ShearDecomposition decompose_shear(double kappa);

/// Output of the gate from the Heisenberg input-output relations, with an
/// independent ancilla of x-variance params.ancilla_vx. Ignores the override
/// and efficiency fields of params.
GaussianStated closed_form_output(const GaussianStated& input,
                                  const GateParams& params);

struct GateShot {
  GaussianStated output;  // conditional state after feed-forward
  HomodyneOutcome<double> outcome;
};

/// One gate invocation resolved down to its outcome-dependent structure.
/// Built by dense simulation: tensor with the ancilla, beamsplitter, optional
/// loss, Gaussian conditioning on the homodyne outcome, feed-forward.
class GateChannel {
 public:
  GateChannel(const GaussianStated& input, const GateParams& params,
              const SignConventions& conventions = kGateConventions);

  /// Homodyne angle in the x cos a + p sin a convention (a = pi/2 - theta).
  double measurement_angle() const { return conditional_.angle; }
  double outcome_mean() const { return conditional_.outcome_mean; }
  double outcome_variance() const { return conditional_.outcome_variance; }
  double feedforward_gain() const { return feedforward_; }

  /// Covariance of the output given any particular outcome.
  const Mat<double>& conditional_cov() const { return conditional_.kept_cov; }
  /// d(output mean)/d(outcome), including the feed-forward displacement.
  Vec<double> mean_slope() const;

  GaussianStated conditional_output(double outcome) const;
  /// Output averaged over the outcome distribution.
  GaussianStated averaged_output() const;

  template <typename Rng>
  GateShot sample(Rng& rng) const {
    std::normal_distribution<double> normal(outcome_mean(),
                                            std::sqrt(outcome_variance()));
    const double value = normal(rng);
    const auto [reduced, flipped] = reduce_angle(measurement_angle());
    return {conditional_output(value),
            HomodyneOutcome<double>{flipped ? -value : value, reduced, 0}};
  }

 private:
  HomodyneConditional<double> conditional_;
  double feedforward_ = 0.0;
};

template <typename Rng>
GateShot simulate_gate_shot(const GaussianStated& input, const GateParams& params,
                            Rng& rng) {
  return GateChannel(input, params).sample(rng);
}

/// Every convention triple whose simulated gate reproduces closed_form_output
/// (means and covariances) on the given kappa grid.
std::vector<SignConventions> matching_conventions(std::span<const double> kappas);

/// Searches the convention space on a grid including kappa != 0 and returns
/// the unique match. Throws std::logic_error if zero or several match.
SignConventions calibrate_signs();

/// calibrate_signs() evaluated once.
const SignConventions& calibrated_conventions();

}  // namespace dsg
