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

// Models of the analog control chain: broken-line (clamp circuit) look-up
// tables for arctan(kappa) and sqrt(1 + kappa^2), gain/offset stages and
// latency.

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dsg {

enum class PwlTarget { kArctan, kSqrt1px2 };

/// "arctan" or "sqrt1px2"; throws std::invalid_argument otherwise.
PwlTarget parse_target(std::string_view name);
std::string_view target_name(PwlTarget target);
double evaluate_target(PwlTarget target, double x);

/// Continuous broken line through (xs[i], ys[i]); constant outside the
/// breakpoint range (clamp circuits).
class PiecewiseLinearFunction {
 public:
  PiecewiseLinearFunction(std::vector<double> xs, std::vector<double> ys);

  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }
  int n_segments() const { return static_cast<int>(xs_.size()) - 1; }
  double clamp_below() const { return ys_.front(); }
  double clamp_above() const { return ys_.back(); }

  double operator()(double x) const;

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
};

enum class FitMethod {
  kMinimax,  // breakpoint equidistribution + minimax ordinates
  kUniform,  // uniform breakpoints interpolating the target
};

PiecewiseLinearFunction fit_pwl(PwlTarget target, int n_segments, double lo,
                                double hi, FitMethod method = FitMethod::kMinimax);

double eval_pwl(const PiecewiseLinearFunction& f, double x);

/// max |f(x) - target(x)| over a uniform grid of grid_points on [lo, hi].
inline constexpr int kMinErrorGridPoints = 1000;

/// Largest |f(x) - target(x)| on a uniform grid including both ends.
double max_error(const PiecewiseLinearFunction& f, PwlTarget target, double lo,
                 double hi, int grid_points = 10001);
double max_error(const PiecewiseLinearFunction& f,
                 const std::function<double(double)>& target, double lo, double hi,
                 int grid_points = 10001);

/// Two-column "x y" text table, ascending x, one pair per line.
void write_pwl_table(std::ostream& os, const PiecewiseLinearFunction& f);
PiecewiseLinearFunction read_pwl_table(std::istream& is);

struct SignalChainStage {
  double gain = 1.0;
  double offset = 0.0;
  double latency_ns = 0.0;

  double operator()(double v) const { return gain * v + offset; }
  /// Stage that undoes gain and offset (zero latency).
  SignalChainStage compensation() const;
};

/// Applies gain/offset of every stage pointwise, then delays the whole trace
/// by the summed latency with linear interpolation (holding the first sample).
std::vector<double> apply_chain(std::span<const double> signal,
                                std::span<const SignalChainStage> stages,
                                double sample_period_ns);

struct DelayModel {
  // 13 m of free space.
  double optical_delay_ns = 43.4;
  double electronics_latency_ns = 10.0;

  void validate() const;
  double mismatch_ns() const;
};

/// The two nonlinear processors driving the gate: LO phase and feed-forward
/// gain as functions of the control value.
struct ControlElectronics {
  PiecewiseLinearFunction arctan_table;
  PiecewiseLinearFunction sqrt_table;
  // Inverting output amplifier followed by its downstream compensation.
  std::vector<SignalChainStage> arctan_stages;
  // Output offset followed by its compensation.
  std::vector<SignalChainStage> sqrt_stages;

  static ControlElectronics fitted(int arctan_segments, int sqrt_segments,
                                   double lo, double hi, double latency_ns,
                                   double sqrt_offset = 0.5);

  struct Drive {
    std::vector<double> lo_phase;
    std::vector<double> gain;
  };
  Drive drive(std::span<const double> kappa, double sample_period_ns) const;
};

}  // namespace dsg
