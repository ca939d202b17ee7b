#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "drtrack/geometry.hpp"

namespace drtrack {

using StateVector = Eigen::Matrix<double, 7, 1>;
using StateCovariance = Eigen::Matrix<double, 7, 7>;
using MeasurementVector = Eigen::Matrix<double, 4, 1>;

/**
 * Noise configuration for the constant-velocity box filter.
 *
 * Process and measurement standard deviations scale with the current box:
 * positions by position_weight * sqrt(area), area by 2 * position_weight * area,
 * and velocities by velocity_weight with the same size terms. The aspect ratio
 * is static per step and gets aspect_weight * r. The two *_scale multipliers
 * switch whole noise sources off (0) for limit-case analysis.
 */
struct KalmanParams {
  double position_weight = 1.0 / 20.0;
  double velocity_weight = 1.0 / 160.0;
  double aspect_weight = 1.0 / 20.0;
  double process_scale = 1.0;
  double measurement_scale = 1.0;
  double init_position_var = 10.0;
  double init_velocity_var = 1000.0;

  void validate() const {
    if (!(position_weight >= 0 && velocity_weight >= 0 && aspect_weight >= 0 && process_scale >= 0 &&
          measurement_scale >= 0)) {
      throw std::invalid_argument("kalman noise weights must be >= 0");
    }
    if (!(init_position_var > 0 && init_velocity_var > 0)) {
      throw std::invalid_argument("kalman initial variances must be > 0");
    }
  }
};

/// [cx, cy, s, r, vcx, vcy, vs]: center, area, aspect ratio w/h, per-frame velocities.
struct KalmanState {
  StateVector mean = StateVector::Zero();
  StateCovariance covariance = StateCovariance::Identity();
};

inline MeasurementVector box_to_measurement(const BBox& b) noexcept {
  MeasurementVector z;
  z << b.cx(), b.cy(), b.area(), b.width() / b.height();
  return z;
}

/// Inverse of box_to_measurement; nullopt when the state's area or ratio is not positive.
inline std::optional<BBox> state_to_box(const StateVector& x) noexcept {
  const double s = x(2), r = x(3);
  if (!(s > 0.0) || !(r > 0.0)) return std::nullopt;
  const double w = std::sqrt(s * r);
  const double h = s / w;
  return BBox::make(x(0) - w / 2.0, x(1) - h / 2.0, x(0) + w / 2.0, x(1) + h / 2.0);
}

namespace detail {

inline StateCovariance transition() {
  StateCovariance f = StateCovariance::Identity();
  f(0, 4) = f(1, 5) = f(2, 6) = 1.0;
  return f;
}

inline Eigen::Matrix<double, 4, 7> observation_model() {
  Eigen::Matrix<double, 4, 7> h = Eigen::Matrix<double, 4, 7>::Zero();
  h.leftCols<4>().setIdentity();
  return h;
}

inline double box_size(const StateVector& x) { return std::sqrt(std::max(x(2), 0.0)); }

inline StateCovariance process_noise(const StateVector& x, const KalmanParams& p) {
  const double size = box_size(x);
  const double s = std::max(x(2), 0.0);
  const double r = std::max(x(3), 0.0);
  StateVector std_dev;
  std_dev << p.position_weight * size, p.position_weight * size, 2.0 * p.position_weight * s,
      p.aspect_weight * r, p.velocity_weight * size, p.velocity_weight * size, 2.0 * p.velocity_weight * s;
  std_dev *= p.process_scale;
  return std_dev.array().square().matrix().asDiagonal();
}

inline Eigen::Matrix4d measurement_noise(const StateVector& x, const KalmanParams& p) {
  const double size = box_size(x);
  const double s = std::max(x(2), 0.0);
  const double r = std::max(x(3), 0.0);
  Eigen::Vector4d std_dev(p.position_weight * size, p.position_weight * size, 2.0 * p.position_weight * s,
                          p.aspect_weight * r);
  std_dev *= p.measurement_scale;
  return std_dev.array().square().matrix().asDiagonal();
}

inline StateCovariance symmetrized(const StateCovariance& m) { return 0.5 * (m + m.transpose()); }

}  // namespace detail

inline KalmanState kf_init(const BBox& b, const KalmanParams& p = {}) {
  KalmanState st;
  st.mean.head<4>() = box_to_measurement(b);
  st.mean.tail<3>().setZero();
  st.covariance.setZero();
  st.covariance.diagonal().head<4>().setConstant(p.init_position_var);
  st.covariance.diagonal().tail<3>().setConstant(p.init_velocity_var);
  return st;
}

/// One frame of constant-velocity propagation. Area velocity is zeroed if it would drive area <= 0.
inline KalmanState kf_predict(KalmanState st, const KalmanParams& p = {}) {
  if (st.mean(2) + st.mean(6) <= 0.0) st.mean(6) = 0.0;
  static const StateCovariance f = detail::transition();
  const StateCovariance q = detail::process_noise(st.mean, p);
  st.mean = f * st.mean;
  st.covariance = detail::symmetrized(f * st.covariance * f.transpose() + q);
  return st;
}

/// Standard Kalman correction with the Joseph-form covariance update.
inline KalmanState kf_update(KalmanState st, const BBox& observation, const KalmanParams& p = {}) {
  static const Eigen::Matrix<double, 4, 7> h = detail::observation_model();
  const Eigen::Matrix4d r = detail::measurement_noise(st.mean, p);
  const MeasurementVector innovation = box_to_measurement(observation) - h * st.mean;
  const Eigen::Matrix4d s = h * st.covariance * h.transpose() + r;
  // Pseudo-inverse keeps the zero-noise limit well defined (S may be singular there).
  const Eigen::Matrix4d s_inv = s.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::Matrix<double, 7, 4> gain = st.covariance * h.transpose() * s_inv;
  const StateCovariance i_kh = StateCovariance::Identity() - gain * h;
  st.mean += gain * innovation;
  st.covariance = detail::symmetrized(i_kh * st.covariance * i_kh.transpose() + gain * r * gain.transpose());
  return st;
}

/// Unit direction of motion in image space.
struct Direction {
  double dx = 0.0;
  double dy = 0.0;
};

/// Optional because stationary motion has no direction.
using VelocityDir = std::optional<Direction>;

inline constexpr double kStationaryEpsilon = 1e-6;

/// Unit vector of the center displacement from `from` to `to`; nullopt below 1e-6 px.
inline VelocityDir observation_direction(const BBox& from, const BBox& to) noexcept {
  const double dx = to.cx() - from.cx();
  const double dy = to.cy() - from.cy();
  const double norm = std::hypot(dx, dy);
  if (norm < kStationaryEpsilon) return std::nullopt;
  return Direction{dx / norm, dy / norm};
}

/// Cosine between two directions, 0 when either is undefined.
inline double vdc_score(const VelocityDir& a, const VelocityDir& b) noexcept {
  if (!a || !b) return 0.0;
  return std::clamp(a->dx * b->dx + a->dy * b->dy, -1.0, 1.0);
}

}  // namespace drtrack
