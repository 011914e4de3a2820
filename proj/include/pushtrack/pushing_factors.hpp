#pragma once

#include <memory>

#include "pushtrack/factor_graph.hpp"
#include "pushtrack/push_sim.hpp"
#include "pushtrack/sdf.hpp"
#include "pushtrack/se2.hpp"

namespace pushtrack {

/// Unary pose prior: residual boxminus(x, target).
class PriorFactor : public Factor {
 public:
  PriorFactor(VariableKey key, Pose2 target, DiagonalNoise noise);

  Eigen::VectorXd residual(const Values& values) const override;
  void jacobians(const Values& values,
                 std::vector<Eigen::MatrixXd>& out) const override;

  const Pose2& target() const { return target_; }

 private:
  Pose2 target_;
};

/// Relative pose constraint: residual boxminus(between(a, b), measured).
/// With an identity measurement this is the stationarity prior used during
/// non-contact intervals.
class BetweenFactor : public Factor {
 public:
  BetweenFactor(VariableKey a, VariableKey b, Pose2 measured, DiagonalNoise noise);

  Eigen::VectorXd residual(const Values& values) const override;
  void jacobians(const Values& values,
                 std::vector<Eigen::MatrixXd>& out) const override;

 private:
  Pose2 measured_;
};

/// Relative tactile factor over (o_a, o_b, e_a, e_b) with a = t-k, b = t:
/// penalizes the deviation of the estimated relative transform
/// [o_a^-1 e_a]^-1 [o_b^-1 e_b] from the model prediction.
class TactileFactor : public Factor {
 public:
  TactileFactor(VariableKey o_a, VariableKey o_b, VariableKey e_a, VariableKey e_b,
                Pose2 predicted, DiagonalNoise noise);

  Eigen::VectorXd residual(const Values& values) const override;
  void jacobians(const Values& values,
                 std::vector<Eigen::MatrixXd>& out) const override;

  const Pose2& predicted() const { return predicted_; }

 private:
  Pose2 predicted_;
};

/// Quasi-static pushing factor over (o_prev, o_cur, e_prev, e_cur):
/// residual D V - V_p with the finite-difference twists rotated into the
/// current object frame and D built from the contact point (the effector
/// position) in the object frame.
class QSFactor : public Factor {
 public:
  QSFactor(VariableKey o_prev, VariableKey o_cur, VariableKey e_prev,
           VariableKey e_cur, PushParams params, DiagonalNoise noise);

  Eigen::VectorXd residual(const Values& values) const override;
  void jacobians(const Values& values,
                 std::vector<Eigen::MatrixXd>& out) const override;

 private:
  PushParams params_;
};

/// Geometric intersection factor over (o_t, e_t): the signed distance of the
/// contact point in the object frame, looked up in the precomputed SDF grid.
/// Two-sided by construction (penetration and separation cost equally).
class GeoFactor : public Factor {
 public:
  GeoFactor(VariableKey o, VariableKey e, std::shared_ptr<const SdfGrid> sdf,
            DiagonalNoise noise);

  Eigen::VectorXd residual(const Values& values) const override;
  void jacobians(const Values& values,
                 std::vector<Eigen::MatrixXd>& out) const override;

  /// True if any residual evaluation left the grid extent (estimator
  /// divergence signal).
  bool saw_out_of_bounds() const { return out_of_bounds_; }

 private:
  std::shared_ptr<const SdfGrid> sdf_;
  mutable bool out_of_bounds_ = false;
};

}  // namespace pushtrack
