#include "pushtrack/se2.hpp"

#include <cmath>

namespace pushtrack {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
// Below this |phi| the closed forms sin(phi)/phi etc. switch to Taylor
// expansions to avoid catastrophic cancellation.
constexpr double kSmallAngle = 1e-7;

}  // namespace

double wrap_angle(double theta) {
  double r = std::fmod(theta + M_PI, kTwoPi);
  if (r <= 0.0) r += kTwoPi;
  return r - M_PI;
}

Pose2::Pose2(double x_, double y_, double theta_)
    : x(x_), y(y_), theta(wrap_angle(theta_)) {}

Eigen::Matrix2d rotation2(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

Eigen::Matrix2d Pose2::rotation() const { return rotation2(theta); }

Pose2 compose(const Pose2& a, const Pose2& b) {
  const Eigen::Vector2d t = a.translation() + a.rotation() * b.translation();
  return {t.x(), t.y(), a.theta + b.theta};
}

Pose2 inverse(const Pose2& a) {
  const Eigen::Vector2d t = -(a.rotation().transpose() * a.translation());
  return {t.x(), t.y(), -a.theta};
}

Pose2 between(const Pose2& a, const Pose2& b) { return compose(inverse(a), b); }

Pose2 exp_map(const Eigen::Vector3d& xi) {
  const double phi = xi.z();
  double a, b;  // V(phi) = [a -b; b a]
  if (std::abs(phi) < kSmallAngle) {
    a = 1.0 - phi * phi / 6.0;
    b = phi / 2.0 - phi * phi * phi / 24.0;
  } else {
    a = std::sin(phi) / phi;
    b = (1.0 - std::cos(phi)) / phi;
  }
  return {a * xi.x() - b * xi.y(), b * xi.x() + a * xi.y(), phi};
}

Eigen::Vector3d log_map(const Pose2& p) {
  const double phi = p.theta;
  // V(phi)^-1 = [alpha, phi/2; -phi/2, alpha] with alpha = (phi/2) cot(phi/2).
  double alpha;
  if (std::abs(phi) < kSmallAngle) {
    alpha = 1.0 - phi * phi / 12.0;
  } else {
    alpha = (phi / 2.0) * std::sin(phi) / (1.0 - std::cos(phi));
  }
  const double half = phi / 2.0;
  return {alpha * p.x + half * p.y, -half * p.x + alpha * p.y, phi};
}

Eigen::Vector3d boxminus(const Pose2& a, const Pose2& b) {
  return log_map(between(b, a));
}

Pose2 boxplus(const Pose2& a, const Eigen::Vector3d& delta) {
  return compose(a, exp_map(delta));
}

Eigen::Matrix3d right_jacobian(const Eigen::Vector3d& xi) {
  const double phi = xi.z(), rx = xi.x(), ry = xi.y();
  double a;  // sin(phi)/phi
  double b;  // (1-cos(phi))/phi
  double d;  // (phi - sin(phi))/phi^2
  double e;  // (1 - cos(phi))/phi^2
  if (std::abs(phi) < kSmallAngle) {
    a = 1.0 - phi * phi / 6.0;
    b = phi / 2.0 - phi * phi * phi / 24.0;
    d = phi / 6.0;
    e = 0.5 - phi * phi / 24.0;
  } else {
    a = std::sin(phi) / phi;
    b = (1.0 - std::cos(phi)) / phi;
    d = (phi - std::sin(phi)) / (phi * phi);
    e = (1.0 - std::cos(phi)) / (phi * phi);
  }
  Eigen::Matrix3d j;
  j << a, b, rx * d - ry * e,  //
      -b, a, ry * d + rx * e,  //
      0.0, 0.0, 1.0;
  return j;
}

Eigen::Matrix3d right_jacobian_inv(const Eigen::Vector3d& xi) {
  const double phi = xi.z();
  double alpha;
  if (std::abs(phi) < kSmallAngle) {
    alpha = 1.0 - phi * phi / 12.0;
  } else {
    alpha = (phi / 2.0) * std::sin(phi) / (1.0 - std::cos(phi));
  }
  const double half = phi / 2.0;
  Eigen::Matrix2d binv;
  binv << alpha, -half, half, alpha;
  const Eigen::Matrix3d j = right_jacobian(xi);
  const Eigen::Vector2d v = j.block<2, 1>(0, 2);
  Eigen::Matrix3d out = Eigen::Matrix3d::Identity();
  out.topLeftCorner<2, 2>() = binv;
  out.block<2, 1>(0, 2) = -binv * v;
  return out;
}

Eigen::Matrix3d adjoint(const Pose2& p) {
  Eigen::Matrix3d ad = Eigen::Matrix3d::Identity();
  ad.topLeftCorner<2, 2>() = p.rotation();
  ad(0, 2) = p.y;
  ad(1, 2) = -p.x;
  return ad;
}

Eigen::Vector2d transform_from(const Pose2& p, const Eigen::Vector2d& point) {
  return p.translation() + p.rotation() * point;
}

Eigen::Vector2d transform_to(const Pose2& p, const Eigen::Vector2d& point) {
  return p.rotation().transpose() * (point - p.translation());
}

Twist2 rotate_into_frame(const Pose2& frame, const Twist2& v) {
  const Eigen::Vector2d lin =
      rotation2(-frame.theta) * Eigen::Vector2d(v.vx, v.vy);
  return {lin.x(), lin.y(), v.omega};
}

}  // namespace pushtrack
