#include "pushtrack/factor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/SparseCholesky>

namespace pushtrack {

std::string to_string(const VariableKey& key) {
  return (key.kind == VarKind::Object ? "o" : "e") + std::to_string(key.t);
}

void Values::insert(const VariableKey& key, const Pose2& pose) {
  if (!map_.emplace(key, pose).second)
    throw SolverError("Values::insert: duplicate key " + to_string(key));
}

void Values::update(const VariableKey& key, const Pose2& pose) {
  auto it = map_.find(key);
  if (it == map_.end())
    throw SolverError("Values::update: missing key " + to_string(key));
  it->second = pose;
}

bool Values::contains(const VariableKey& key) const {
  return map_.count(key) > 0;
}

const Pose2& Values::at(const VariableKey& key) const {
  auto it = map_.find(key);
  if (it == map_.end())
    throw SolverError("Values::at: missing key " + to_string(key));
  return it->second;
}

std::vector<VariableKey> Values::sorted_keys() const {
  std::vector<VariableKey> keys;
  keys.reserve(map_.size());
  for (const auto& [key, pose] : map_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  return keys;
}

DiagonalNoise::DiagonalNoise(Eigen::VectorXd sigmas) : sigmas_(std::move(sigmas)) {
  for (int i = 0; i < sigmas_.size(); ++i)
    if (!(sigmas_[i] > 0.0))
      throw SolverError("DiagonalNoise: sigmas must be positive");
}

DiagonalNoise DiagonalNoise::from_covariance_diag(const Eigen::VectorXd& cov) {
  return DiagonalNoise(cov.array().sqrt().matrix());
}

DiagonalNoise DiagonalNoise::isotropic(int dim, double sigma) {
  return DiagonalNoise(Eigen::VectorXd::Constant(dim, sigma));
}

Eigen::VectorXd DiagonalNoise::whiten(const Eigen::VectorXd& residual) const {
  if (residual.size() != sigmas_.size())
    throw SolverError("DiagonalNoise::whiten: dimension mismatch");
  return residual.cwiseQuotient(sigmas_);
}

Eigen::VectorXd DiagonalNoise::unwhiten(const Eigen::VectorXd& whitened) const {
  if (whitened.size() != sigmas_.size())
    throw SolverError("DiagonalNoise::unwhiten: dimension mismatch");
  return whitened.cwiseProduct(sigmas_);
}

namespace {

using Triplet = Eigen::Triplet<double>;

struct Columns {
  std::vector<VariableKey> order;
  std::unordered_map<VariableKey, int, VariableKeyHash> column_of;
};

// Column layout over the given factors, restricted to keys accepted by
// `active` (pass nullptr for all keys). Keys are ordered (timestep, kind).
template <typename Pred>
Columns build_columns(const std::vector<FactorPtr>& factors, Pred active) {
  std::set<VariableKey> keys;
  for (const auto& f : factors)
    for (const auto& k : f->keys())
      if (active(k)) keys.insert(k);
  Columns cols;
  cols.order.assign(keys.begin(), keys.end());
  for (size_t i = 0; i < cols.order.size(); ++i)
    cols.column_of[cols.order[i]] = static_cast<int>(3 * i);
  return cols;
}

double cost_of(const std::vector<FactorPtr>& factors, const Values& values) {
  double cost = 0.0;
  for (const auto& f : factors) cost += 0.5 * f->whitened_residual(values).squaredNorm();
  return cost;
}

// Whitened Jacobian/residual over `factors` with columns from `cols`.
void assemble(const std::vector<FactorPtr>& factors, const Values& values,
              const Columns& cols, Eigen::SparseMatrix<double>& jac,
              Eigen::VectorXd& res) {
  int rows = 0;
  for (const auto& f : factors) rows += f->dim();
  res.resize(rows);
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<size_t>(rows) * 6);
  std::vector<Eigen::MatrixXd> blocks;
  int row = 0;
  for (const auto& f : factors) {
    const Eigen::VectorXd r = f->residual(values);
    blocks.clear();
    f->jacobians(values, blocks);
    const Eigen::VectorXd& sig = f->noise().sigmas();
    for (int i = 0; i < f->dim(); ++i) res[row + i] = r[i] / sig[i];
    for (size_t k = 0; k < f->keys().size(); ++k) {
      auto it = cols.column_of.find(f->keys()[k]);
      if (it == cols.column_of.end()) continue;  // frozen variable
      const int col = it->second;
      const Eigen::MatrixXd& blk = blocks[k];
      for (int i = 0; i < blk.rows(); ++i)
        for (int j = 0; j < 3; ++j) {
          const double v = blk(i, j) / sig[i];
          if (v != 0.0) triplets.emplace_back(row + i, col + j, v);
        }
    }
    row += f->dim();
  }
  jac.resize(rows, static_cast<int>(3 * cols.order.size()));
  jac.setFromTriplets(triplets.begin(), triplets.end());
}

// Levenberg-Marquardt over a subset of variables; factors not touching an
// active variable still contribute cost through their residuals but are
// assumed fixed, so callers pass only the relevant factor range.
void lm_optimize(const std::vector<FactorPtr>& factors, Values& values,
                 const Columns& cols, const SolveParams& params,
                 SolveStats* stats_out) {
  SolveStats stats;
  stats.initial_cost = cost_of(factors, values);
  stats.final_cost = stats.initial_cost;
  if (!std::isfinite(stats.initial_cost))
    throw SolverError("solve: non-finite initial cost");
  if (cols.order.empty() || factors.empty()) {
    if (stats_out) *stats_out = stats;
    return;
  }

  double lambda = params.lambda_init;
  double cost = stats.initial_cost;
  Eigen::SparseMatrix<double> jac;
  Eigen::VectorXd res;
  bool relinearize = true;
  Eigen::VectorXd grad;
  Eigen::SparseMatrix<double> hess;
  Eigen::VectorXd diag;

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    if (relinearize) {
      assemble(factors, values, cols, jac, res);
      hess = Eigen::SparseMatrix<double>(jac.transpose() * jac);
      grad = jac.transpose() * res;
      diag = hess.diagonal().cwiseMax(1e-12);
      relinearize = false;
    }

    Eigen::SparseMatrix<double> damped = hess;
    // Marquardt scaling: damp proportionally to the Hessian diagonal.
    for (int i = 0; i < damped.rows(); ++i)
      damped.coeffRef(i, i) += lambda * diag[i];

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(damped);
    if (chol.info() != Eigen::Success) {
      lambda *= params.lambda_factor;
      if (lambda > params.lambda_max)
        throw SolverError("solve: system singular at maximum damping");
      continue;
    }
    ++stats.iterations;
    const Eigen::VectorXd delta = chol.solve(-grad);
    if (!delta.allFinite())
      throw SolverError("solve: non-finite update step");
    if (delta.norm() < params.step_tol) break;

    Values candidate = values;
    for (size_t i = 0; i < cols.order.size(); ++i)
      candidate.update(cols.order[i],
                       boxplus(values.at(cols.order[i]),
                               delta.segment<3>(static_cast<int>(3 * i))));
    const double new_cost = cost_of(factors, candidate);
    if (!std::isfinite(new_cost))
      throw SolverError("solve: non-finite cost after update");

    if (new_cost < cost) {
      values = std::move(candidate);
      ++stats.accepted_steps;
      const double decrease = (cost - new_cost) / std::max(cost, 1e-300);
      cost = new_cost;
      lambda = std::max(lambda / params.lambda_factor, 1e-12);
      relinearize = true;
      if (decrease < params.relative_cost_tol) break;
    } else {
      lambda *= params.lambda_factor;
      if (lambda > params.lambda_max) break;  // no further progress possible
    }
  }

  stats.final_cost = cost;
  if (stats_out) *stats_out = stats;
}

}  // namespace

LinearSystem linearize(const FactorGraph& graph, const Values& values) {
  const Columns cols =
      build_columns(graph.factors(), [](const VariableKey&) { return true; });
  LinearSystem sys;
  sys.order = cols.order;
  sys.column_of = cols.column_of;
  assemble(graph.factors(), values, cols, sys.jacobian, sys.residual);
  return sys;
}

double total_cost(const FactorGraph& graph, const Values& values) {
  return cost_of(graph.factors(), values);
}

Values solve_batch(const FactorGraph& graph, const Values& initial,
                   const SolveParams& params, SolveStats* stats) {
  Values values = initial;
  const Columns cols =
      build_columns(graph.factors(), [](const VariableKey&) { return true; });
  lm_optimize(graph.factors(), values, cols, params, stats);
  return values;
}

Eigen::MatrixXd numeric_jacobian(const Factor& factor, const Values& values,
                                 size_t key_index, double step) {
  const VariableKey key = factor.keys().at(key_index);
  Eigen::MatrixXd jac(factor.dim(), 3);
  for (int j = 0; j < 3; ++j) {
    Eigen::Vector3d delta = Eigen::Vector3d::Zero();
    delta[j] = step;
    Values plus = values;
    plus.update(key, boxplus(values.at(key), delta));
    Values minus = values;
    minus.update(key, boxplus(values.at(key), -delta));
    jac.col(j) = (factor.residual(plus) - factor.residual(minus)) / (2.0 * step);
  }
  return jac;
}

IncrementalSolver::IncrementalSolver(IncrementalParams params)
    : params_(std::move(params)) {}

const Values& IncrementalSolver::update(const std::vector<FactorPtr>& new_factors,
                                        const Values& new_values) {
  for (const auto& key : new_values.sorted_keys()) {
    values_.insert(key, new_values.at(key));
    latest_t_ = std::max(latest_t_, key.t);
  }
  for (const auto& f : new_factors) {
    graph_.add(f);
    for (const auto& key : f->keys()) {
      if (!values_.contains(key))
        throw SolverError("IncrementalSolver: factor references missing key " +
                          to_string(key));
      latest_t_ = std::max(latest_t_, key.t);
    }
  }
  ++steps_;

  const bool full = params_.full_solve_every > 0 &&
                    latest_t_ >= 0 && latest_t_ % params_.full_solve_every == 0;
  if (full) {
    const Columns cols = build_columns(graph_.factors(),
                                       [](const VariableKey&) { return true; });
    lm_optimize(graph_.factors(), values_, cols, params_.solver, &last_stats_);
    return values_;
  }

  const int window_start = latest_t_ - params_.lag;
  // Factors are appended in nondecreasing max-timestep order by the
  // estimator; walk back from the tail until we fall out of the window.
  std::vector<FactorPtr> window;
  const auto& all = graph_.factors();
  for (auto it = all.rbegin(); it != all.rend(); ++it) {
    int max_t = -1;
    for (const auto& key : (*it)->keys()) max_t = std::max(max_t, key.t);
    if (max_t < window_start) break;
    window.push_back(*it);
  }
  const Columns cols = build_columns(
      window, [&](const VariableKey& k) { return k.t >= window_start; });
  lm_optimize(window, values_, cols, params_.solver, &last_stats_);
  return values_;
}

}  // namespace pushtrack
