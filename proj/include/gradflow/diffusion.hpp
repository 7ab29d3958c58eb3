#pragma once

#include <Eigen/Dense>

namespace gradflow {

/// Constant symmetric positive definite diffusion tensor with its extreme
/// eigenvalues and symmetric square root.
class DiffusionSpec {
 public:
  explicit DiffusionSpec(const Eigen::MatrixXd& a);
  static DiffusionSpec identity(int dim) { return DiffusionSpec(Eigen::MatrixXd::Identity(dim, dim)); }

  int dimension() const { return static_cast<int>(a_.rows()); }
  const Eigen::MatrixXd& matrix() const { return a_; }
  const Eigen::MatrixXd& sqrt_matrix() const { return sqrt_a_; }
  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }
  bool is_identity() const { return identity_; }

 private:
  Eigen::MatrixXd a_, sqrt_a_;
  double lambda_min_ = 1.0, lambda_max_ = 1.0;
  bool identity_ = true;
};

}  // namespace gradflow
