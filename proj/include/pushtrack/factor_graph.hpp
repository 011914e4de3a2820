#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "pushtrack/se2.hpp"

namespace pushtrack {

/// Thrown for modeling and solver failures (non-finite cost, singular
/// systems, missing variables). Carries a human-readable reason.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

enum class VarKind : uint8_t { Object = 0, EndEffector = 1 };

/// Identifies one latent pose variable: an object or end-effector pose at a
/// timestep. Total order is (timestep, kind), which fixes column order in
/// the linearized system.
struct VariableKey {
  VarKind kind = VarKind::Object;
  int32_t t = 0;

  uint64_t id() const {
    return (static_cast<uint64_t>(static_cast<uint32_t>(t)) << 1) |
           static_cast<uint64_t>(kind);
  }
  friend bool operator==(const VariableKey& a, const VariableKey& b) {
    return a.kind == b.kind && a.t == b.t;
  }
  friend bool operator<(const VariableKey& a, const VariableKey& b) {
    if (a.t != b.t) return a.t < b.t;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  }
};

inline VariableKey object_key(int32_t t) { return {VarKind::Object, t}; }
inline VariableKey effector_key(int32_t t) { return {VarKind::EndEffector, t}; }

std::string to_string(const VariableKey& key);

struct VariableKeyHash {
  size_t operator()(const VariableKey& k) const {
    return std::hash<uint64_t>()(k.id());
  }
};

/// Current estimates for all variables.
class Values {
 public:
  void insert(const VariableKey& key, const Pose2& pose);
  void update(const VariableKey& key, const Pose2& pose);
  bool contains(const VariableKey& key) const;
  const Pose2& at(const VariableKey& key) const;
  size_t size() const { return map_.size(); }

  /// Keys in (timestep, kind) order.
  std::vector<VariableKey> sorted_keys() const;

 private:
  std::unordered_map<VariableKey, Pose2, VariableKeyHash> map_;
};

/// Diagonal Gaussian noise model given as per-dimension standard deviations.
class DiagonalNoise {
 public:
  DiagonalNoise() = default;
  explicit DiagonalNoise(Eigen::VectorXd sigmas);

  /// Interprets the entries as a covariance diagonal (sigma = sqrt(entry)).
  static DiagonalNoise from_covariance_diag(const Eigen::VectorXd& cov);
  static DiagonalNoise isotropic(int dim, double sigma);

  int dim() const { return static_cast<int>(sigmas_.size()); }
  const Eigen::VectorXd& sigmas() const { return sigmas_; }

  Eigen::VectorXd whiten(const Eigen::VectorXd& residual) const;
  Eigen::VectorXd unwhiten(const Eigen::VectorXd& whitened) const;

 private:
  Eigen::VectorXd sigmas_;
};

/// One cost term ||r(x)||^2_Sigma over a fixed set of variables. Residuals
/// are unwhitened; the graph applies the noise model. Immutable after
/// construction and shareable across threads.
class Factor {
 public:
  virtual ~Factor() = default;

  const std::vector<VariableKey>& keys() const { return keys_; }
  const DiagonalNoise& noise() const { return noise_; }
  int dim() const { return noise_.dim(); }

  virtual Eigen::VectorXd residual(const Values& values) const = 0;

  /// Analytic Jacobians of the residual w.r.t. each variable's boxplus
  /// perturbation, one dim x 3 block per key, in key order.
  virtual void jacobians(const Values& values,
                         std::vector<Eigen::MatrixXd>& out) const = 0;

  Eigen::VectorXd whitened_residual(const Values& values) const {
    return noise_.whiten(residual(values));
  }

 protected:
  Factor(std::vector<VariableKey> keys, DiagonalNoise noise)
      : keys_(std::move(keys)), noise_(std::move(noise)) {}

  std::vector<VariableKey> keys_;
  DiagonalNoise noise_;
};

using FactorPtr = std::shared_ptr<const Factor>;

class FactorGraph {
 public:
  void add(FactorPtr factor) { factors_.push_back(std::move(factor)); }
  const std::vector<FactorPtr>& factors() const { return factors_; }
  size_t size() const { return factors_.size(); }

 private:
  std::vector<FactorPtr> factors_;
};

/// Whitened Jacobian/residual stack. Columns follow `order` (3 per key);
/// only keys referenced by at least one factor get columns.
struct LinearSystem {
  Eigen::SparseMatrix<double> jacobian;
  Eigen::VectorXd residual;
  std::vector<VariableKey> order;
  std::unordered_map<VariableKey, int, VariableKeyHash> column_of;
};

LinearSystem linearize(const FactorGraph& graph, const Values& values);

struct SolveParams {
  double lambda_init = 1e-4;
  double lambda_factor = 10.0;
  double lambda_max = 1e6;
  int max_iterations = 100;
  double relative_cost_tol = 1e-9;
  double step_tol = 1e-10;
};

struct SolveStats {
  int iterations = 0;       // LM iterations attempted
  int accepted_steps = 0;   // steps that lowered the cost
  double initial_cost = 0.0;
  double final_cost = 0.0;
};

/// Total whitened cost 0.5 * sum ||r_i||^2_Sigma.
double total_cost(const FactorGraph& graph, const Values& values);

/// Levenberg-Marquardt on the manifold. Throws SolverError on non-finite
/// cost or a system that stays singular at maximum damping.
Values solve_batch(const FactorGraph& graph, const Values& initial,
                   const SolveParams& params = {}, SolveStats* stats = nullptr);

/// Central finite differences of the residual w.r.t. the variable at
/// `key_index`, step 1e-6 in the boxplus chart. Validation oracle for the
/// analytic Jacobians.
Eigen::MatrixXd numeric_jacobian(const Factor& factor, const Values& values,
                                 size_t key_index, double step = 1e-6);

struct IncrementalParams {
  int lag = 100;              // variables newer than (t - lag) stay active
  int full_solve_every = 25;  // periodic full relinearization
  SolveParams solver;
};

/// Fixed-lag incremental smoother: every update optimizes the trailing
/// window around the newest timestep while older variables keep their
/// estimates; every `full_solve_every` steps the whole graph is re-solved.
class IncrementalSolver {
 public:
  explicit IncrementalSolver(IncrementalParams params = {});

  /// Adds factors and newly initialized variables, then re-optimizes.
  /// New keys must not already be present.
  const Values& update(const std::vector<FactorPtr>& new_factors,
                       const Values& new_values);

  const Values& estimate() const { return values_; }
  const FactorGraph& graph() const { return graph_; }
  const SolveStats& last_stats() const { return last_stats_; }

 private:
  IncrementalParams params_;
  FactorGraph graph_;
  Values values_;
  int latest_t_ = -1;
  int steps_ = 0;
  SolveStats last_stats_;
};

}  // namespace pushtrack
