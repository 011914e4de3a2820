#include "pushtrack/pushing_factors.hpp"

#include <cmath>

namespace pushtrack {

namespace {

// 90-degree rotation of a 2-vector: J v with J = [[0, -1], [1, 0]].
Eigen::Vector2d perp(const Eigen::Vector2d& v) { return {-v.y(), v.x()}; }

Eigen::Matrix3d limit_surface(const Eigen::Vector2d& q, double c) {
  Eigen::Matrix3d d;
  d << 1.0, 0.0, -q.y(),  //
      0.0, 1.0, q.x(),    //
      -q.y(), q.x(), -c * c;
  return d;
}

}  // namespace

PriorFactor::PriorFactor(VariableKey key, Pose2 target, DiagonalNoise noise)
    : Factor({key}, std::move(noise)), target_(target) {}

Eigen::VectorXd PriorFactor::residual(const Values& values) const {
  return boxminus(values.at(keys_[0]), target_);
}

void PriorFactor::jacobians(const Values& values,
                            std::vector<Eigen::MatrixXd>& out) const {
  out.resize(1);
  out[0] = right_jacobian_inv(residual(values));
}

BetweenFactor::BetweenFactor(VariableKey a, VariableKey b, Pose2 measured,
                             DiagonalNoise noise)
    : Factor({a, b}, std::move(noise)), measured_(measured) {}

Eigen::VectorXd BetweenFactor::residual(const Values& values) const {
  return boxminus(between(values.at(keys_[0]), values.at(keys_[1])), measured_);
}

void BetweenFactor::jacobians(const Values& values,
                              std::vector<Eigen::MatrixXd>& out) const {
  const Pose2 rel = between(values.at(keys_[0]), values.at(keys_[1]));
  const Eigen::Matrix3d jr_inv = right_jacobian_inv(boxminus(rel, measured_));
  out.resize(2);
  out[0] = -jr_inv * adjoint(inverse(rel));
  out[1] = jr_inv;
}

TactileFactor::TactileFactor(VariableKey o_a, VariableKey o_b, VariableKey e_a,
                             VariableKey e_b, Pose2 predicted, DiagonalNoise noise)
    : Factor({o_a, o_b, e_a, e_b}, std::move(noise)), predicted_(predicted) {}

Eigen::VectorXd TactileFactor::residual(const Values& values) const {
  const Pose2 n_a = between(values.at(keys_[0]), values.at(keys_[2]));
  const Pose2 n_b = between(values.at(keys_[1]), values.at(keys_[3]));
  return boxminus(between(n_a, n_b), predicted_);
}

void TactileFactor::jacobians(const Values& values,
                              std::vector<Eigen::MatrixXd>& out) const {
  const Pose2 n_a = between(values.at(keys_[0]), values.at(keys_[2]));
  const Pose2 n_b = between(values.at(keys_[1]), values.at(keys_[3]));
  const Pose2 t_graph = between(n_a, n_b);
  const Eigen::Matrix3d jr_inv =
      right_jacobian_inv(boxminus(t_graph, predicted_));
  const Eigen::Matrix3d ad_nb_inv = adjoint(inverse(n_b));
  out.resize(4);
  out[0] = jr_inv * ad_nb_inv;                      // o_a
  out[1] = -jr_inv * ad_nb_inv;                     // o_b
  out[2] = -jr_inv * adjoint(inverse(t_graph));     // e_a
  out[3] = jr_inv;                                  // e_b
}

QSFactor::QSFactor(VariableKey o_prev, VariableKey o_cur, VariableKey e_prev,
                   VariableKey e_cur, PushParams params, DiagonalNoise noise)
    : Factor({o_prev, o_cur, e_prev, e_cur}, std::move(noise)),
      params_(params) {
  if (params_.dt <= 0.0) throw SolverError("QSFactor: dt must be positive");
}

Eigen::VectorXd QSFactor::residual(const Values& values) const {
  const Pose2& op = values.at(keys_[0]);
  const Pose2& oc = values.at(keys_[1]);
  const Pose2& ep = values.at(keys_[2]);
  const Pose2& ec = values.at(keys_[3]);
  const double dt = params_.dt;
  const Eigen::Matrix2d rot = rotation2(-oc.theta);
  const Eigen::Vector2d v_lin =
      rot * Eigen::Vector2d(oc.x - op.x, oc.y - op.y) / dt;
  const Eigen::Vector3d v(v_lin.x(), v_lin.y(),
                          wrap_angle(oc.theta - op.theta) / dt);
  const Eigen::Vector2d u_lin =
      rot * Eigen::Vector2d(ec.x - ep.x, ec.y - ep.y) / dt;
  const Eigen::Vector3d v_p(u_lin.x(), u_lin.y(), 0.0);
  const Eigen::Vector2d q = transform_to(oc, ec.translation());
  return limit_surface(q, params_.c) * v - v_p;
}

void QSFactor::jacobians(const Values& values,
                         std::vector<Eigen::MatrixXd>& out) const {
  const Pose2& op = values.at(keys_[0]);
  const Pose2& oc = values.at(keys_[1]);
  const Pose2& ep = values.at(keys_[2]);
  const Pose2& ec = values.at(keys_[3]);
  const double dt = params_.dt;
  const Eigen::Matrix2d rot = rotation2(-oc.theta);
  const Eigen::Vector2d v_lin =
      rot * Eigen::Vector2d(oc.x - op.x, oc.y - op.y) / dt;
  const double omega = wrap_angle(oc.theta - op.theta) / dt;
  const Eigen::Vector2d u_lin =
      rot * Eigen::Vector2d(ec.x - ep.x, ec.y - ep.y) / dt;
  const Eigen::Vector2d q = transform_to(oc, ec.translation());
  const Eigen::Matrix3d d = limit_surface(q, params_.c);

  // dD(q)V/dq with V fixed.
  Eigen::Matrix<double, 3, 2> g;
  g << 0.0, -omega,  //
      omega, 0.0,    //
      v_lin.y(), -v_lin.x();

  out.assign(4, Eigen::MatrixXd::Zero(3, 3));

  // o_prev: through the object twist only.
  {
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    a.topLeftCorner<2, 2>() = -rotation2(op.theta - oc.theta) / dt;
    a(2, 2) = -1.0 / dt;
    out[0] = d * a;
  }
  // o_cur: twist, rotation into the object frame, and the contact point.
  {
    Eigen::MatrixXd j = d / dt;  // twist contribution (R(-theta) R(theta) = I)
    j.block<3, 2>(0, 0) -= g;    // dq/d(rho) = -I
    Eigen::Vector3d col3 = j.col(2);
    col3 += g * (-perp(q));                                      // dq/d(theta)
    col3 += d * Eigen::Vector3d(v_lin.y(), -v_lin.x(), 0.0);     // dV/d(theta)
    col3 += Eigen::Vector3d(-u_lin.y(), u_lin.x(), 0.0);         // -dV_p/d(theta)
    j.col(2) = col3;
    out[1] = j;
  }
  // e_prev: through V_p only.
  out[2].topLeftCorner<2, 2>() = rotation2(ep.theta - oc.theta) / dt;
  // e_cur: V_p and the contact point.
  {
    const Eigen::Matrix2d r_ec = rotation2(ec.theta - oc.theta);
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(3, 3);
    j.block<3, 2>(0, 0) = g * r_ec;
    j.block<2, 2>(0, 0) -= r_ec / dt;
    out[3] = j;
  }
}

GeoFactor::GeoFactor(VariableKey o, VariableKey e, std::shared_ptr<const SdfGrid> sdf,
                     DiagonalNoise noise)
    : Factor({o, e}, std::move(noise)), sdf_(std::move(sdf)) {}

Eigen::VectorXd GeoFactor::residual(const Values& values) const {
  const Pose2& o = values.at(keys_[0]);
  const Pose2& e = values.at(keys_[1]);
  const Eigen::Vector2d q = transform_to(o, e.translation());
  const SdfLookup hit = sdf_->lookup_interpolant(q);
  if (hit.out_of_bounds) out_of_bounds_ = true;
  return Eigen::VectorXd::Constant(1, hit.distance);
}

void GeoFactor::jacobians(const Values& values,
                          std::vector<Eigen::MatrixXd>& out) const {
  const Pose2& o = values.at(keys_[0]);
  const Pose2& e = values.at(keys_[1]);
  const Eigen::Vector2d q = transform_to(o, e.translation());
  const SdfLookup hit = sdf_->lookup_interpolant(q);
  const Eigen::RowVector2d g = hit.gradient.transpose();
  out.assign(2, Eigen::MatrixXd::Zero(1, 3));
  out[0].block<1, 2>(0, 0) = -g;
  out[0](0, 2) = -g * perp(q);
  out[1].block<1, 2>(0, 0) = g * rotation2(e.theta - o.theta);
}

}  // namespace pushtrack
