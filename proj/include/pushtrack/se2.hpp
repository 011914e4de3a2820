#pragma once

#include <Eigen/Core>

namespace pushtrack {

/// Planar rigid transform / pose, stored as (x, y, theta) with theta kept
/// in (-pi, pi]. Used for object poses, end-effector poses and relative
/// transforms alike. Value type; all operations are free functions.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_);

  Eigen::Vector2d translation() const { return {x, y}; }
  Eigen::Matrix2d rotation() const;

  static Pose2 identity() { return {}; }
};

/// Planar twist (vx, vy, omega).
struct Twist2 {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  Eigen::Vector3d vec() const { return {vx, vy, omega}; }
};

/// Wraps an angle to (-pi, pi]; ties at +-pi resolve to +pi.
double wrap_angle(double theta);

Eigen::Matrix2d rotation2(double theta);

Pose2 compose(const Pose2& a, const Pose2& b);
Pose2 inverse(const Pose2& a);
/// a^-1 * b.
Pose2 between(const Pose2& a, const Pose2& b);

/// Group exponential of xi = (rho_x, rho_y, phi).
Pose2 exp_map(const Eigen::Vector3d& xi);
/// Inverse of exp_map.
Eigen::Vector3d log_map(const Pose2& p);

/// Local-coordinate difference of a relative to b: log(between(b, a)).
Eigen::Vector3d boxminus(const Pose2& a, const Pose2& b);
/// Retraction: a * exp(delta). Inverse of boxminus in the second argument.
Pose2 boxplus(const Pose2& a, const Eigen::Vector3d& delta);

/// Right Jacobian of the exponential map at xi and its inverse. These give
/// the first-order relation exp(xi + d) ~ exp(xi) * exp(Jr(xi) d), which the
/// analytic factor Jacobians rely on for log-chart residuals.
Eigen::Matrix3d right_jacobian(const Eigen::Vector3d& xi);
Eigen::Matrix3d right_jacobian_inv(const Eigen::Vector3d& xi);

/// Adjoint matrix Ad_p with p * exp(d) * p^-1 = exp(Ad_p d).
Eigen::Matrix3d adjoint(const Pose2& p);

/// Applies p to a point (object-to-world when p is an object pose).
Eigen::Vector2d transform_from(const Pose2& p, const Eigen::Vector2d& point);
/// Applies p^-1 to a point (world-to-object).
Eigen::Vector2d transform_to(const Pose2& p, const Eigen::Vector2d& point);

/// Rotates the linear part of v into the frame of `frame` (by -theta);
/// omega passes through.
Twist2 rotate_into_frame(const Pose2& frame, const Twist2& v);

}  // namespace pushtrack
