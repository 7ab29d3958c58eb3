#pragma once

// Entropy-regularized optimal transport between discrete measures,
//
//   OT_eps(a, b) = min_P <P, C> + eps KL(P | a b^T),
//
// solved by log-domain Sinkhorn iterations on the dual potentials f, g with
// P_ij = a_i b_j exp((f_i + g_j - C_ij) / eps).

#include <Eigen/Dense>

namespace gradflow {

/// C_ij = |x_i - y_j|^2 for point columns x_i, y_j.
Eigen::MatrixXd squared_distance_cost(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

struct SinkhornConfig {
  double epsilon = 0.01;
  /// Stop once max_i |sum_j P_ij - a_i| < tol (column sums are exact after
  /// every sweep).
  double tol = 1e-9;
  int max_iterations = 100000;

  void validate() const;
};

struct SinkhornState {
  double epsilon = 0.0;
  Eigen::VectorXd f, g;  // dual potentials
  Eigen::MatrixXd plan;
  double transport_cost = 0.0;  // <P, C>
  double value = 0.0;           // OT_eps(a, b) = <f, a> + <g, b> at convergence
  int iterations = 0;
  double marginal_residual = 0.0;
  bool converged = false;
};

/// `a` and `b` are nonnegative and sum to one; zero weights are allowed.
/// `warm_g` (optional, size of b) seeds the column potential.
SinkhornState sinkhorn(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& cost,
                       const SinkhornConfig& config, const Eigen::VectorXd* warm_g = nullptr);

/// OT_eps(a, a) by the averaged fixed-point iteration f <- (f + T(f)) / 2,
/// which avoids the slow mass exchange of alternating sweeps between well
/// separated clusters. Returns f = g. `warm_f` optionally seeds f.
SinkhornState sinkhorn_symmetric(const Eigen::VectorXd& a, const Eigen::MatrixXd& cost, const SinkhornConfig& config,
                                 const Eigen::VectorXd* warm_f = nullptr);

}  // namespace gradflow
