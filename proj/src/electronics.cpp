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

#include "dsg/electronics.hpp"


#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dsg/csv.hpp"

namespace dsg {

PwlTarget parse_target(std::string_view name) {
  if (name == "arctan") return PwlTarget::kArctan;
  if (name == "sqrt1px2") return PwlTarget::kSqrt1px2;
  throw std::invalid_argument("unknown PWL target '" + std::string(name) +
                              "' (expected arctan or sqrt1px2)");
}

std::string_view target_name(PwlTarget target) {
  return target == PwlTarget::kArctan ? "arctan" : "sqrt1px2";
}

double evaluate_target(PwlTarget target, double x) {
  switch (target) {
    case PwlTarget::kArctan:
      return std::atan(x);
    case PwlTarget::kSqrt1px2:
      return std::sqrt(1.0 + x * x);
  }
  return 0.0;
}

PiecewiseLinearFunction::PiecewiseLinearFunction(std::vector<double> xs,
                                                 std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
  if (xs_.size() < 2 || xs_.size() != ys_.size()) {
    throw std::invalid_argument(
        "PiecewiseLinearFunction: need >= 2 breakpoints with matching x/y");
  }
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    if (!std::isfinite(xs_[i]) || !std::isfinite(ys_[i])) {
      throw std::invalid_argument("PiecewiseLinearFunction: non-finite breakpoint");
    }
    if (i > 0 && !(xs_[i] > xs_[i - 1])) {
      throw std::invalid_argument(
          "PiecewiseLinearFunction: breakpoint x values must be strictly increasing");
    }
  }
}

double PiecewiseLinearFunction::operator()(double x) const {
  if (x <= xs_.front()) return ys_.front();
  if (x >= xs_.back()) return ys_.back();
  const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - xs_.begin()) - 1;
  const double t = (x - xs_[j]) / (xs_[j + 1] - xs_[j]);
  return ys_[j] + t * (ys_[j + 1] - ys_[j]);
}

double eval_pwl(const PiecewiseLinearFunction& f, double x) { return f(x); }

double max_error(const PiecewiseLinearFunction& f, const std::function<double(double)>& target,
                 double lo, double hi, int grid_points) {
  if (grid_points < kMinErrorGridPoints || !(lo < hi)) {
    throw std::invalid_argument("max_error: need grid_points >= " +
                                std::to_string(kMinErrorGridPoints) + " and lo < hi");
  }
  double worst = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    const double x = lo + (hi - lo) * i / (grid_points - 1);
    worst = std::max(worst, std::abs(f(x) - target(x)));
  }
  return worst;
}

double max_error(const PiecewiseLinearFunction& f, PwlTarget target, double lo, double hi,
                 int grid_points) {
  return max_error(
      f, [target](double x) { return evaluate_target(target, x); }, lo, hi, grid_points);
}

namespace {

// Dense-grid minimax fit of a continuous broken line.
//
// For fixed breakpoints the ordinates solve a linear Chebyshev problem,
// handled with Lawson's iteratively reweighted least squares. Breakpoints are
// moved so that per-segment errors equalize. Odd/even targets on a symmetric
// range are fitted with mirrored breakpoints and tied ordinates.
class PwlFitter {
 public:
  PwlFitter(PwlTarget target, int n_segments, double lo, double hi)
      : target_(target), n_(n_segments), lo_(lo), hi_(hi) {
    const double scale = std::max(std::abs(lo), std::abs(hi));
    if (std::abs(lo + hi) <= 1e-12 * scale) {
      parity_ = target == PwlTarget::kArctan ? -1 : 1;
    }
    const int m = std::max(4001, 400 * n_segments + 1);
    grid_.resize(m);
    values_.resize(m);
    for (int i = 0; i < m; ++i) {
      grid_[i] = lo + (hi - lo) * i / (m - 1);
    }
    if (parity_ != 0) {
      for (int i = 0; i < m / 2; ++i) grid_[m - 1 - i] = -grid_[i];
      if (m % 2 == 1) grid_[m / 2] = 0.0;
    }
    for (int i = 0; i < m; ++i) values_[i] = evaluate_target(target, grid_[i]);
    build_tie_map();
  }

  std::vector<double> uniform_knots() const {
    std::vector<double> k(n_ + 1);
    for (int i = 0; i <= n_; ++i) k[i] = lo_ + (hi_ - lo_) * i / n_;
    symmetrize(k);
    return k;
  }

  PiecewiseLinearFunction interpolant(const std::vector<double>& knots) const {
    std::vector<double> ys(knots.size());
    for (std::size_t i = 0; i < knots.size(); ++i) ys[i] = evaluate_target(target_, knots[i]);
    tie(ys);
    return PiecewiseLinearFunction(knots, ys);
  }

  double grid_error(const PiecewiseLinearFunction& f) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      worst = std::max(worst, std::abs(f(grid_[i]) - values_[i]));
    }
    return worst;
  }

  PiecewiseLinearFunction minimax_ordinates(const std::vector<double>& knots) const {
    const std::size_t m = grid_.size();
    const int k = n_free_;
    std::vector<int> seg(m);
    std::vector<double> frac(m);
    locate(knots, seg, frac);

    std::vector<double> w(m, 1.0 / static_cast<double>(m));
    std::vector<double> ys(knots.size());
    PiecewiseLinearFunction best = interpolant(knots);
    double best_err = grid_error(best);
    int stale = 0;
    for (int iter = 0; iter < kLawsonIterations && stale < kLawsonPatience; ++iter) {
      Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(k, k);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
      for (std::size_t g = 0; g < m; ++g) {
        const int j = seg[g];
        const double t = frac[g];
        // Up to two hat functions touch a grid point; map through the ties.
        const int ia = free_index_[j], ib = free_index_[j + 1];
        const double ca = (1.0 - t) * free_sign_[j], cb = t * free_sign_[j + 1];
        if (ia >= 0) {
          normal(ia, ia) += w[g] * ca * ca;
          rhs(ia) += w[g] * ca * values_[g];
        }
        if (ib >= 0) {
          normal(ib, ib) += w[g] * cb * cb;
          rhs(ib) += w[g] * cb * values_[g];
        }
        if (ia >= 0 && ib >= 0) {
          normal(ia, ib) += w[g] * ca * cb;
          normal(ib, ia) += w[g] * ca * cb;
        }
      }
      normal.diagonal().array() += 1e-15 * normal.diagonal().maxCoeff();
      const Eigen::VectorXd z = normal.ldlt().solve(rhs);
      for (std::size_t i = 0; i < ys.size(); ++i) {
        ys[i] = free_index_[i] >= 0 ? free_sign_[i] * z(free_index_[i]) : 0.0;
      }
      PiecewiseLinearFunction f(knots, ys);

      double total = 0.0, err_max = 0.0;
      for (std::size_t g = 0; g < m; ++g) {
        const double e = std::abs(f(grid_[g]) - values_[g]);
        err_max = std::max(err_max, e);
        w[g] *= e;
        total += w[g];
      }
      if (err_max < best_err * (1.0 - 1e-12)) {
        best_err = err_max;
        best = f;
        stale = 0;
      } else {
        ++stale;
      }
      if (!(total > 0.0)) break;
      double wmax = 0.0;
      for (double& v : w) {
        v /= total;
        wmax = std::max(wmax, v);
      }
      for (double& v : w) v = std::max(v, 1e-13 * wmax);
    }
    return best;
  }

  /// Moves breakpoints towards equal per-segment error of `f`.
  std::vector<double> redistribute(const std::vector<double>& knots,
                                   const PiecewiseLinearFunction& f) const {
    const std::vector<double> err = segment_errors(knots, f);
    std::vector<double> density(n_);
    double mean = 0.0;
    for (int j = 0; j < n_; ++j) {
      // Local error ~ c h^2, so the optimal point density scales as sqrt(c).
      density[j] = std::sqrt(err[j]) / (knots[j + 1] - knots[j]);
      mean += density[j] / n_;
    }
    for (double& d : density) d = std::max(d, 1e-3 * mean);
    std::vector<double> cumulative(n_ + 1, 0.0);
    for (int j = 0; j < n_; ++j) {
      cumulative[j + 1] = cumulative[j] + density[j] * (knots[j + 1] - knots[j]);
    }
    std::vector<double> next(n_ + 1);
    next.front() = lo_;
    next.back() = hi_;
    int j = 0;
    for (int i = 1; i < n_; ++i) {
      const double level = cumulative.back() * i / n_;
      while (j < n_ - 1 && cumulative[j + 1] < level) ++j;
      const double t = (level - cumulative[j]) / (cumulative[j + 1] - cumulative[j]);
      next[i] = 0.5 * knots[i] + 0.5 * (knots[j] + t * (knots[j + 1] - knots[j]));
    }
    symmetrize(next);
    return next;
  }

  PiecewiseLinearFunction fit() const {
    std::vector<PiecewiseLinearFunction> candidates;
    std::vector<double> knots = uniform_knots();
    candidates.push_back(interpolant(knots));
    candidates.push_back(minimax_ordinates(knots));

    // Phase 1: equalize interpolation error (cheap).
    PiecewiseLinearFunction best_interp = interpolant(knots);
    double best_interp_err = grid_error(best_interp);
    for (int iter = 0; iter < kInterpolationRounds; ++iter) {
      knots = redistribute(knots, interpolant(knots));
      PiecewiseLinearFunction f = interpolant(knots);
      const double e = grid_error(f);
      if (e < best_interp_err) {
        best_interp_err = e;
        best_interp = f;
      }
    }
    knots = best_interp.xs();
    PiecewiseLinearFunction current = minimax_ordinates(knots);
    candidates.push_back(current);

    // Phase 2: equalize the minimax error itself.
    for (int iter = 0; iter < kMinimaxRounds; ++iter) {
      knots = redistribute(knots, current);
      current = minimax_ordinates(knots);
      candidates.push_back(current);
    }

    std::size_t best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double e = grid_error(candidates[i]);
      if (e < best_err) {
        best_err = e;
        best = i;
      }
    }
    return candidates[best];
  }

 private:
  static constexpr int kLawsonIterations = 2000;
  static constexpr int kLawsonPatience = 300;
  static constexpr int kInterpolationRounds = 80;
  static constexpr int kMinimaxRounds = 8;

  void build_tie_map() {
    free_index_.assign(n_ + 1, -1);
    free_sign_.assign(n_ + 1, 1.0);
    n_free_ = 0;
    if (parity_ == 0) {
      for (int i = 0; i <= n_; ++i) free_index_[i] = n_free_++;
      return;
    }
    for (int i = 0; i <= n_; ++i) {
      const int mirror = n_ - i;
      if (i < mirror) {
        free_index_[i] = n_free_++;
      } else if (i == mirror) {
        if (parity_ > 0) free_index_[i] = n_free_++;
      } else {
        // Ordinate at x_i = -x_mirror is parity * y_mirror.
        free_index_[i] = free_index_[mirror];
        free_sign_[i] = parity_;
      }
    }
  }

  void symmetrize(std::vector<double>& knots) const {
    if (parity_ == 0) return;
    for (int i = 0; i <= n_ / 2; ++i) {
      const int mirror = n_ - i;
      const double a = 0.5 * (knots[mirror] - knots[i]);
      knots[mirror] = a;
      knots[i] = -a;
    }
    if (n_ % 2 == 0) knots[n_ / 2] = 0.0;
  }

  void tie(std::vector<double>& ys) const {
    if (parity_ == 0) return;
    for (int i = 0; i <= n_; ++i) {
      const int mirror = n_ - i;
      if (i > mirror) ys[i] = parity_ * ys[mirror];
      if (i == mirror && parity_ < 0) ys[i] = 0.0;
    }
  }

  void locate(const std::vector<double>& knots, std::vector<int>& seg,
              std::vector<double>& frac) const {
    int j = 0;
    for (std::size_t g = 0; g < grid_.size(); ++g) {
      while (j < n_ - 1 && grid_[g] > knots[j + 1]) ++j;
      seg[g] = j;
      frac[g] = std::clamp((grid_[g] - knots[j]) / (knots[j + 1] - knots[j]), 0.0, 1.0);
    }
  }

  std::vector<double> segment_errors(const std::vector<double>& knots,
                                     const PiecewiseLinearFunction& f) const {
    std::vector<double> err(n_, 0.0);
    int j = 0;
    for (std::size_t g = 0; g < grid_.size(); ++g) {
      while (j < n_ - 1 && grid_[g] > knots[j + 1]) ++j;
      err[j] = std::max(err[j], std::abs(f(grid_[g]) - values_[g]));
    }
    return err;
  }

  PwlTarget target_;
  int n_;
  double lo_, hi_;
  int parity_ = 0;
  std::vector<double> grid_;
  std::vector<double> values_;
  std::vector<int> free_index_;
  std::vector<double> free_sign_;
  int n_free_ = 0;
};

}  // namespace

PiecewiseLinearFunction fit_pwl(PwlTarget target, int n_segments, double lo,
                                double hi, FitMethod method) {
  if (n_segments < 1) throw std::invalid_argument("fit_pwl: n_segments must be >= 1");
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw std::invalid_argument("fit_pwl: need finite lo < hi");
  }
  PwlFitter fitter(target, n_segments, lo, hi);
  if (method == FitMethod::kUniform) return fitter.interpolant(fitter.uniform_knots());
  return fitter.fit();
}

void write_pwl_table(std::ostream& os, const PiecewiseLinearFunction& f) {
  for (std::size_t i = 0; i < f.xs().size(); ++i) {
    os << format_number(f.xs()[i]) << ' ' << format_number(f.ys()[i]) << '\n';
  }
}

PiecewiseLinearFunction read_pwl_table(std::istream& is) {
  std::vector<double> xs, ys;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string xs_text, ys_text, extra;
    if (!(fields >> xs_text >> ys_text) || (fields >> extra)) {
      throw std::invalid_argument("PWL table line " + std::to_string(line_no) +
                                  ": expected two columns 'x y'");
    }
    xs.push_back(parse_number(xs_text));
    ys.push_back(parse_number(ys_text));
  }
  return PiecewiseLinearFunction(std::move(xs), std::move(ys));
}

SignalChainStage SignalChainStage::compensation() const {
  if (gain == 0.0) throw std::invalid_argument("SignalChainStage: zero gain cannot be compensated");
  return SignalChainStage{1.0 / gain, -offset / gain, 0.0};
}

std::vector<double> apply_chain(std::span<const double> signal,
                                std::span<const SignalChainStage> stages,
                                double sample_period_ns) {
  if (!(sample_period_ns > 0.0)) {
    throw std::invalid_argument("apply_chain: sample period must be > 0");
  }
  std::vector<double> out(signal.begin(), signal.end());
  double latency = 0.0;
  for (const SignalChainStage& stage : stages) {
    if (stage.latency_ns < 0.0) throw std::invalid_argument("apply_chain: negative latency");
    for (double& v : out) v = stage(v);
    latency += stage.latency_ns;
  }
  if (latency == 0.0 || out.empty()) return out;

  const double shift = latency / sample_period_ns;
  std::vector<double> delayed(out.size());
  const auto last = static_cast<double>(out.size() - 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double pos = std::clamp(static_cast<double>(i) - shift, 0.0, last);
    const auto j = static_cast<std::size_t>(std::floor(pos));
    const double t = pos - static_cast<double>(j);
    delayed[i] = j + 1 < out.size() ? out[j] + t * (out[j + 1] - out[j]) : out[j];
  }
  return delayed;
}

void DelayModel::validate() const {
  if (!(optical_delay_ns >= 0.0) || !(electronics_latency_ns >= 0.0)) {
    throw std::invalid_argument("DelayModel: delays must be >= 0");
  }
}

double DelayModel::mismatch_ns() const {
  return std::abs(optical_delay_ns - electronics_latency_ns);
}

ControlElectronics ControlElectronics::fitted(int arctan_segments, int sqrt_segments,
                                              double lo, double hi, double latency_ns,
                                              double sqrt_offset) {
  if (latency_ns < 0.0) throw std::invalid_argument("ControlElectronics: negative latency");
  const SignalChainStage inverter{-1.0, 0.0, latency_ns};
  const SignalChainStage offset{1.0, sqrt_offset, latency_ns};
  return ControlElectronics{
      fit_pwl(PwlTarget::kArctan, arctan_segments, lo, hi),
      fit_pwl(PwlTarget::kSqrt1px2, sqrt_segments, lo, hi),
      {inverter, inverter.compensation()},
      {offset, offset.compensation()},
  };
}

ControlElectronics::Drive ControlElectronics::drive(std::span<const double> kappa,
                                                    double sample_period_ns) const {
  std::vector<double> phase(kappa.size()), gain(kappa.size());
  for (std::size_t i = 0; i < kappa.size(); ++i) {
    phase[i] = arctan_table(kappa[i]);
    gain[i] = sqrt_table(kappa[i]);
  }
  return Drive{apply_chain(phase, arctan_stages, sample_period_ns),
               apply_chain(gain, sqrt_stages, sample_period_ns)};
}

}  // namespace dsg
