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

// Gaussian phase-space representation of multimode optical states.
//
// Conventions (fixed project-wide):
//  * hbar = 1, vacuum quadrature variance 1/2.
//  * Interleaved ordering (x_1, p_1, ..., x_N, p_N); Omega = (+) [[0,1],[-1,0]].
//  * rotation(t): x -> x cos t - p sin t, p -> x sin t + p cos t.
//  * squeeze(r): x -> e^{-r} x, p -> e^{r} p.
//  * beamsplitter(T): out1 = sqrt(T) a1 + sqrt(1-T) a2,
//                     out2 = sqrt(1-T) a1 - sqrt(T) a2 (same for x and p).
//  * A homodyne at angle a measures x cos a + p sin a.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace dsg {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kVacuumVariance = 0.5;
inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kSymplecticTolerance = 1e-10;
inline constexpr double kUncertaintyTolerance = 1e-9;
// Quadrature variances below this are treated as singular for conditioning.
inline constexpr double kMinConditioningVariance = 1e-12;

/// Standard symplectic form for n_modes in interleaved ordering.
template <typename Scalar = double>
Mat<Scalar> symplectic_form(Eigen::Index n_modes) {
  Mat<Scalar> omega = Mat<Scalar>::Zero(2 * n_modes, 2 * n_modes);
  for (Eigen::Index k = 0; k < n_modes; ++k) {
    omega(2 * k, 2 * k + 1) = Scalar(1);
    omega(2 * k + 1, 2 * k) = Scalar(-1);
  }
  return omega;
}

template <typename Scalar>
class GaussianState;

template <typename Scalar>
bool is_physical(const GaussianState<Scalar>& state,
                 double tol = kUncertaintyTolerance);

// Optional global audit: when enabled, every constructed state is checked for
// physicality and the tallies are kept for later inspection.
struct PhysicalityAudit {
  std::atomic<bool> enabled{false};
  std::atomic<long long> checked{0};
  std::atomic<long long> violations{0};

  void reset() {
    checked = 0;
    violations = 0;
  }
};

inline PhysicalityAudit& physicality_audit() {
  static PhysicalityAudit audit;
  return audit;
}

/// Mean vector and covariance matrix of an N-mode Gaussian state.
template <typename Scalar = double>
class GaussianState {
 public:
  using VectorType = Vec<Scalar>;
  using MatrixType = Mat<Scalar>;

  GaussianState() = default;

  GaussianState(VectorType mean, MatrixType cov)
      : mean_(std::move(mean)), cov_(std::move(cov)) {
    if (mean_.size() % 2 != 0) {
      throw std::invalid_argument("GaussianState: mean length must be even");
    }
    if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
      throw std::invalid_argument(
          "GaussianState: covariance must be 2N x 2N matching the mean");
    }
    if (!mean_.allFinite() || !cov_.allFinite()) {
      throw std::invalid_argument("GaussianState: non-finite moments");
    }
    if (cov_.size() == 0) return;
    const Scalar scale = std::max<Scalar>(Scalar(1), cov_.cwiseAbs().maxCoeff());
    if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() >
        Scalar(kSymmetryTolerance) * scale) {
      throw std::invalid_argument("GaussianState: covariance is not symmetric");
    }
    auto& audit = physicality_audit();
    if (audit.enabled.load(std::memory_order_relaxed) && n_modes() > 0) {
      ++audit.checked;
      if (!is_physical(*this)) ++audit.violations;
    }
  }

  Eigen::Index n_modes() const { return mean_.size() / 2; }
  const VectorType& mean() const { return mean_; }
  const MatrixType& cov() const { return cov_; }

  /// 2x2 covariance block of one mode.
  Eigen::Matrix<Scalar, 2, 2> mode_cov(Eigen::Index mode) const {
    check_mode(mode);
    return cov_.template block<2, 2>(2 * mode, 2 * mode);
  }
  Eigen::Matrix<Scalar, 2, 1> mode_mean(Eigen::Index mode) const {
    check_mode(mode);
    return mean_.template segment<2>(2 * mode);
  }

  void check_mode(Eigen::Index mode) const {
    if (mode < 0 || mode >= n_modes()) {
      throw std::out_of_range("GaussianState: mode index " +
                              std::to_string(mode) + " out of range");
    }
  }

 private:
  VectorType mean_;
  MatrixType cov_;
};

/// Affine phase-space map r -> matrix * r + displacement.
template <typename Scalar = double>
class SymplecticTransform {
 public:
  using VectorType = Vec<Scalar>;
  using MatrixType = Mat<Scalar>;

  SymplecticTransform(MatrixType matrix, VectorType displacement)
      : matrix_(std::move(matrix)), displacement_(std::move(displacement)) {
    if (matrix_.rows() != matrix_.cols() || matrix_.rows() % 2 != 0 ||
        displacement_.size() != matrix_.rows()) {
      throw std::invalid_argument(
          "SymplecticTransform: need a 2N x 2N matrix and a length-2N "
          "displacement");
    }
    if (!matrix_.allFinite() || !displacement_.allFinite()) {
      throw std::invalid_argument("SymplecticTransform: non-finite entries");
    }
    const MatrixType omega = symplectic_form<Scalar>(n_modes());
    const Scalar scale =
        std::max<Scalar>(Scalar(1), matrix_.cwiseAbs().maxCoeff());
    if ((matrix_ * omega * matrix_.transpose() - omega).cwiseAbs().maxCoeff() >
        Scalar(kSymplecticTolerance) * scale * scale) {
      throw std::invalid_argument("SymplecticTransform: matrix is not symplectic");
    }
  }

  explicit SymplecticTransform(MatrixType matrix)
      : SymplecticTransform(matrix, VectorType::Zero(matrix.rows())) {}

  static SymplecticTransform identity(Eigen::Index n_modes) {
    return SymplecticTransform(MatrixType::Identity(2 * n_modes, 2 * n_modes));
  }

  Eigen::Index n_modes() const { return matrix_.rows() / 2; }
  const MatrixType& matrix() const { return matrix_; }
  const VectorType& displacement() const { return displacement_; }

 private:
  MatrixType matrix_;
  VectorType displacement_;
};

/// Composition: (a * b) applies b first, then a.
template <typename Scalar>
SymplecticTransform<Scalar> operator*(const SymplecticTransform<Scalar>& a,
                                      const SymplecticTransform<Scalar>& b) {
  if (a.n_modes() != b.n_modes()) {
    throw std::invalid_argument("compose: mode count mismatch");
  }
  return SymplecticTransform<Scalar>(
      a.matrix() * b.matrix(), a.matrix() * b.displacement() + a.displacement());
}

template <typename Scalar>
SymplecticTransform<Scalar> inverse(const SymplecticTransform<Scalar>& t) {
  // S^{-1} = -Omega S^T Omega for symplectic S.
  const Mat<Scalar> omega = symplectic_form<Scalar>(t.n_modes());
  Mat<Scalar> inv = -omega * t.matrix().transpose() * omega;
  Vec<Scalar> d = -(inv * t.displacement());
  return SymplecticTransform<Scalar>(std::move(inv), std::move(d));
}

template <typename Scalar = double>
SymplecticTransform<Scalar> rotation(Scalar theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("rotation: non-finite angle");
  Mat<Scalar> m(2, 2);
  const Scalar c = std::cos(theta), s = std::sin(theta);
  m << c, -s, s, c;
  return SymplecticTransform<Scalar>(std::move(m));
}

template <typename Scalar = double>
SymplecticTransform<Scalar> squeeze(Scalar r) {
  if (!std::isfinite(r)) throw std::invalid_argument("squeeze: non-finite parameter");
  Mat<Scalar> m = Mat<Scalar>::Zero(2, 2);
  m(0, 0) = std::exp(-r);
  m(1, 1) = std::exp(r);
  return SymplecticTransform<Scalar>(std::move(m));
}

/// Quadratic phase gate generated by kappa x^2: x -> x, p -> p + kappa x.
template <typename Scalar = double>
SymplecticTransform<Scalar> shear(Scalar kappa) {
  if (!std::isfinite(kappa)) throw std::invalid_argument("shear: non-finite kappa");
  Mat<Scalar> m = Mat<Scalar>::Identity(2, 2);
  m(1, 0) = kappa;
  return SymplecticTransform<Scalar>(std::move(m));
}

template <typename Scalar = double>
SymplecticTransform<Scalar> displace(const Vec<Scalar>& d) {
  return SymplecticTransform<Scalar>(Mat<Scalar>::Identity(d.size(), d.size()),
                                     d);
}

/// Two-mode coupler. sign = -1 flips the sign of the second input's
/// contribution (used only when searching convention space).
template <typename Scalar = double>
SymplecticTransform<Scalar> beamsplitter(Scalar transmittance, int sign = 1) {
  if (!(transmittance >= Scalar(0) && transmittance <= Scalar(1))) {
    throw std::invalid_argument("beamsplitter: transmittance must be in [0, 1]");
  }
  if (sign != 1 && sign != -1) {
    throw std::invalid_argument("beamsplitter: sign must be +1 or -1");
  }
  const Scalar t = std::sqrt(transmittance);
  const Scalar r = Scalar(sign) * std::sqrt(Scalar(1) - transmittance);
  Mat<Scalar> m = Mat<Scalar>::Zero(4, 4);
  for (int q = 0; q < 2; ++q) {
    m(q, q) = t;
    m(q, 2 + q) = r;
    m(2 + q, q) = r;
    m(2 + q, 2 + q) = -t;
  }
  return SymplecticTransform<Scalar>(std::move(m));
}

/// Places a k-mode transform on modes [first_mode, first_mode + k) of an
/// n_modes system, identity elsewhere.
template <typename Scalar>
SymplecticTransform<Scalar> embed(const SymplecticTransform<Scalar>& t,
                                  Eigen::Index n_modes, Eigen::Index first_mode) {
  const Eigen::Index k = t.n_modes();
  if (first_mode < 0 || first_mode + k > n_modes) {
    throw std::out_of_range("embed: transform does not fit the mode range");
  }
  Mat<Scalar> m = Mat<Scalar>::Identity(2 * n_modes, 2 * n_modes);
  Vec<Scalar> d = Vec<Scalar>::Zero(2 * n_modes);
  m.block(2 * first_mode, 2 * first_mode, 2 * k, 2 * k) = t.matrix();
  d.segment(2 * first_mode, 2 * k) = t.displacement();
  return SymplecticTransform<Scalar>(std::move(m), std::move(d));
}

template <typename Scalar = double>
GaussianState<Scalar> make_vacuum(Eigen::Index n_modes) {
  if (n_modes < 1) throw std::invalid_argument("make_vacuum: n_modes must be >= 1");
  return GaussianState<Scalar>(
      Vec<Scalar>::Zero(2 * n_modes),
      Scalar(kVacuumVariance) * Mat<Scalar>::Identity(2 * n_modes, 2 * n_modes));
}

template <typename Scalar = double>
GaussianState<Scalar> make_coherent(Scalar x_mean, Scalar p_mean) {
  if (!std::isfinite(x_mean) || !std::isfinite(p_mean)) {
    throw std::invalid_argument("make_coherent: non-finite amplitude");
  }
  Vec<Scalar> mean(2);
  mean << x_mean, p_mean;
  return GaussianState<Scalar>(
      std::move(mean), Scalar(kVacuumVariance) * Mat<Scalar>::Identity(2, 2));
}

/// Pure squeezed vacuum with x-variance vx (p-variance 1/(4 vx)).
template <typename Scalar = double>
GaussianState<Scalar> make_squeezed_vacuum(Scalar vx) {
  if (!(vx > Scalar(0)) || !std::isfinite(vx)) {
    throw std::invalid_argument("make_squeezed_vacuum: variance must be > 0");
  }
  if (vx < Scalar(kMinConditioningVariance)) {
    throw std::invalid_argument("make_squeezed_vacuum: variance below 1e-12");
  }
  Mat<Scalar> cov = Mat<Scalar>::Zero(2, 2);
  cov(0, 0) = vx;
  cov(1, 1) = Scalar(1) / (Scalar(4) * vx);
  return GaussianState<Scalar>(Vec<Scalar>::Zero(2), std::move(cov));
}

/// Noise level relative to shot noise (0.5), in dB.
template <typename Scalar = double>
Scalar variance_to_db(Scalar v) {
  if (!(v > Scalar(0))) throw std::invalid_argument("variance_to_db: variance must be > 0");
  return Scalar(10) * std::log10(v / Scalar(kVacuumVariance));
}

template <typename Scalar = double>
Scalar db_to_variance(Scalar db) {
  if (!std::isfinite(db)) throw std::invalid_argument("db_to_variance: non-finite dB");
  return Scalar(kVacuumVariance) * std::pow(Scalar(10), db / Scalar(10));
}

/// Direct sum of two states (modes of b follow modes of a).
template <typename Scalar>
GaussianState<Scalar> tensor(const GaussianState<Scalar>& a,
                             const GaussianState<Scalar>& b) {
  const Eigen::Index na = a.mean().size(), nb = b.mean().size();
  Vec<Scalar> mean(na + nb);
  mean << a.mean(), b.mean();
  Mat<Scalar> cov = Mat<Scalar>::Zero(na + nb, na + nb);
  cov.topLeftCorner(na, na) = a.cov();
  cov.bottomRightCorner(nb, nb) = b.cov();
  return GaussianState<Scalar>(std::move(mean), std::move(cov));
}

template <typename Scalar>
GaussianState<Scalar> apply(const GaussianState<Scalar>& state,
                            const SymplecticTransform<Scalar>& t) {
  if (state.n_modes() != t.n_modes()) {
    throw std::invalid_argument("apply: transform acts on " +
                                std::to_string(t.n_modes()) +
                                " modes, state has " +
                                std::to_string(state.n_modes()));
  }
  Vec<Scalar> mean = t.matrix() * state.mean() + t.displacement();
  Mat<Scalar> cov = t.matrix() * state.cov() * t.matrix().transpose();
  Mat<Scalar> sym = Scalar(0.5) * (cov + cov.transpose());
  return GaussianState<Scalar>(std::move(mean), std::move(sym));
}

/// Pure-loss channel of transmissivity eta on one mode.
template <typename Scalar>
GaussianState<Scalar> pure_loss(const GaussianState<Scalar>& state,
                                Eigen::Index mode, std::type_identity_t<Scalar> eta) {
  state.check_mode(mode);
  if (!(eta >= Scalar(0) && eta <= Scalar(1))) {
    throw std::invalid_argument("pure_loss: efficiency must be in [0, 1]");
  }
  const Scalar a = std::sqrt(eta);
  Vec<Scalar> scale = Vec<Scalar>::Ones(state.mean().size());
  scale.template segment<2>(2 * mode).setConstant(a);
  Vec<Scalar> mean = scale.cwiseProduct(state.mean());
  Mat<Scalar> cov = scale.asDiagonal() * state.cov() * scale.asDiagonal();
  cov.template block<2, 2>(2 * mode, 2 * mode) +=
      (Scalar(1) - eta) * Scalar(kVacuumVariance) * Mat<Scalar>::Identity(2, 2);
  return GaussianState<Scalar>(std::move(mean), std::move(cov));
}

template <typename Scalar>
Scalar quadrature_mean(const GaussianState<Scalar>& state, Eigen::Index mode,
                       std::type_identity_t<Scalar> angle) {
  const Eigen::Matrix<Scalar, 2, 1> u(std::cos(angle), std::sin(angle));
  return u.dot(state.mode_mean(mode));
}

/// u^T V u with u = (cos angle, sin angle) on the given mode.
template <typename Scalar>
Scalar quadrature_variance(const GaussianState<Scalar>& state, Eigen::Index mode,
                           std::type_identity_t<Scalar> angle) {
  const Eigen::Matrix<Scalar, 2, 1> u(std::cos(angle), std::sin(angle));
  return u.dot(state.mode_cov(mode) * u);
}

/// Sorted symplectic eigenvalues (moduli of the spectrum of i Omega V).
template <typename Scalar>
Vec<Scalar> symplectic_eigenvalues(const GaussianState<Scalar>& state) {
  const Eigen::Index n = state.n_modes();
  Vec<Scalar> nu(n);
  if (n == 0) return nu;
  if (n == 1) {
    nu(0) = std::sqrt(std::max<Scalar>(Scalar(0), state.cov().determinant()));
    return nu;
  }
  const Mat<Scalar> m = symplectic_form<Scalar>(n) * state.cov();
  Eigen::EigenSolver<Mat<Scalar>> solver(m, /*computeEigenvectors=*/false);
  std::vector<Scalar> moduli;
  moduli.reserve(2 * n);
  for (Eigen::Index i = 0; i < 2 * n; ++i) moduli.push_back(std::abs(solver.eigenvalues()(i)));
  std::sort(moduli.begin(), moduli.end());
  // Eigenvalues come in +/- i nu pairs.
  for (Eigen::Index k = 0; k < n; ++k) {
    nu(k) = Scalar(0.5) * (moduli[2 * k] + moduli[2 * k + 1]);
  }
  return nu;
}

template <typename Scalar>
bool is_physical(const GaussianState<Scalar>& state, double tol) {
  if (state.n_modes() == 0) return true;
  const auto& cov = state.cov();
  const Scalar scale = std::max<Scalar>(Scalar(1), cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() >
      Scalar(kSymmetryTolerance) * scale) {
    return false;
  }
  const Vec<Scalar> nu = symplectic_eigenvalues(state);
  return nu.minCoeff() >= Scalar(kVacuumVariance) - Scalar(tol);
}

/// Reduces an angle to [0, pi). flipped is true when an odd multiple of pi
/// was removed, i.e. the quadrature changed sign.
template <typename Scalar>
std::pair<Scalar, bool> reduce_angle(Scalar angle) {
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar turns = std::floor(angle / pi);
  Scalar reduced = angle - turns * pi;
  if (reduced >= pi) reduced -= pi;
  if (reduced < Scalar(0)) reduced = Scalar(0);
  const bool flipped = static_cast<long long>(turns) % 2 != 0;
  return {reduced, flipped};
}

template <typename Scalar = double>
struct HomodyneOutcome {
  Scalar value{};
  Scalar angle{};  // in [0, pi)
  Eigen::Index mode{};
};

/// Linear-Gaussian structure of a homodyne measurement: the outcome
/// distribution and the affine dependence of the remaining modes on it.
template <typename Scalar = double>
struct HomodyneConditional {
  Eigen::Index mode{};
  Scalar angle{};
  Scalar outcome_mean{};
  Scalar outcome_variance{};
  Vec<Scalar> kept_mean;  // remaining-mode mean at value == outcome_mean
  Vec<Scalar> gain;       // d(remaining mean) / d(value)
  Mat<Scalar> kept_cov;   // Schur complement; outcome independent

  Vec<Scalar> mean_given(Scalar value) const {
    return kept_mean + gain * (value - outcome_mean);
  }
  GaussianState<Scalar> state_given(Scalar value) const {
    return GaussianState<Scalar>(mean_given(value), kept_cov);
  }
};

template <typename Scalar>
HomodyneConditional<Scalar> homodyne_condition(const GaussianState<Scalar>& state,
                                               Eigen::Index mode,
                                               std::type_identity_t<Scalar> angle) {
  state.check_mode(mode);
  const Eigen::Index dim = state.mean().size();
  const Eigen::Matrix<Scalar, 2, 1> u(std::cos(angle), std::sin(angle));

  std::vector<Eigen::Index> keep;
  keep.reserve(dim - 2);
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (i / 2 != mode) keep.push_back(i);
  }

  HomodyneConditional<Scalar> out;
  out.mode = mode;
  out.angle = angle;
  out.outcome_mean = u.dot(state.mode_mean(mode));
  out.outcome_variance = u.dot(state.mode_cov(mode) * u);
  if (out.outcome_variance < Scalar(kMinConditioningVariance)) {
    throw std::domain_error(
        "homodyne_condition: measured quadrature variance below 1e-12");
  }
  const Vec<Scalar> cross = state.cov()(keep, std::array<Eigen::Index, 2>{2 * mode, 2 * mode + 1}) * u;
  out.gain = cross / out.outcome_variance;
  out.kept_mean = state.mean()(keep);
  Mat<Scalar> cov = state.cov()(keep, keep) - out.gain * cross.transpose();
  out.kept_cov = Scalar(0.5) * (cov + cov.transpose());
  return out;
}

/// Samples the quadrature at `angle` and conditions the remaining modes on
/// the result. The measured mode is removed from the returned state.
template <typename Scalar, typename Rng>
std::pair<HomodyneOutcome<Scalar>, GaussianState<Scalar>> homodyne_measure(
    const GaussianState<Scalar>& state, Eigen::Index mode,
    std::type_identity_t<Scalar> angle, Rng& rng) {
  const HomodyneConditional<Scalar> cond = homodyne_condition(state, mode, angle);
  std::normal_distribution<Scalar> normal(cond.outcome_mean,
                                          std::sqrt(cond.outcome_variance));
  const Scalar value = normal(rng);
  const auto [reduced, flipped] = reduce_angle(angle);
  HomodyneOutcome<Scalar> outcome{flipped ? -value : value, reduced, mode};
  return {outcome, cond.state_given(value)};
}

/// Draws one homodyne sample of a mode without returning the post-measurement
/// state.
template <typename Scalar, typename Rng>
Scalar sample_quadrature(const GaussianState<Scalar>& state, Eigen::Index mode,
                         std::type_identity_t<Scalar> angle, Rng& rng) {
  std::normal_distribution<Scalar> normal(
      quadrature_mean(state, mode, angle),
      std::sqrt(quadrature_variance(state, mode, angle)));
  return normal(rng);
}

using GaussianStated = GaussianState<double>;
using SymplecticTransformd = SymplecticTransform<double>;

}  // namespace dsg
